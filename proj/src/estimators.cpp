#include "polyscore/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "polyscore/errors.hpp"
#include "polyscore/parallel.hpp"
#include "polyscore/rng.hpp"

namespace polyscore {

std::string to_string(Estimator e) { return e == Estimator::SM ? "sm" : "mle"; }

Estimator parse_estimator(const std::string& s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "sm") return Estimator::SM;
  if (lower == "mle") return Estimator::MLE;
  throw std::invalid_argument("unknown estimator '" + s + "' (expected sm or mle)");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_samples(const SampleSet& s, std::size_t n) {
  if (s.N == 0) throw std::invalid_argument("sample set is empty");
  if (s.n != n) {
    throw std::invalid_argument("samples have n=" + std::to_string(s.n) + " but the family has n=" +
                                std::to_string(n));
  }
}

double power(double x, int k) {
  double v = 1.0;
  for (int i = 0; i < k; ++i) v *= x;
  return v;
}

std::string null_directions(const Eigen::MatrixXd& G, const MonomialBasis& basis) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  std::ostringstream out;
  bool first = true;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    if (es.eigenvalues()[k] > 1e-12 * top) continue;
    const Eigen::VectorXd v = es.eigenvectors().col(k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    out << (first ? "" : ", ") << "x^(" << basis[static_cast<std::size_t>(arg)].key() << ")";
    first = false;
  }
  return first ? std::string("none detected") : out.str();
}

double condition_number(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return std::max(1.0, hi / lo);
}

}  // namespace

// --- score matching -------------------------------------------------------------------

SmStatistics sm_statistics(const SampleSet& s, const MonomialBasis& basis) {
  require_samples(s, basis.n());
  const auto m = static_cast<Eigen::Index>(basis.size());
  const std::size_t n = basis.n();
  const int d = basis.d();
  SmStatistics st;
  st.N = s.N;
  st.G = Eigen::MatrixXd::Zero(m, m);
  st.b = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd grad_h(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < s.N; ++k) {
    const auto x = s.row(k);
    const Eigen::MatrixXd J = eval_jacobian(basis, x);
    double lap_h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      grad_h[static_cast<Eigen::Index>(i)] = -(d + 1) * power(x[i], d);
      lap_h -= (d + 1) * d * power(x[i], d - 1);
    }
    st.G.noalias() += J * J.transpose();
    st.b.noalias() += eval_laplacian(basis, x) + J * grad_h;
    st.c += lap_h + 0.5 * grad_h.squaredNorm();
  }
  const double inv = 1.0 / static_cast<double>(s.N);
  st.G *= inv;
  st.G = 0.5 * (st.G + st.G.transpose()).eval();
  st.b *= inv;
  st.c *= inv;
  return st;
}

double sm_loss(const ParamVector& theta, const SampleSet& s) {
  require_samples(s, theta.n());
  const MonomialBasis& basis = theta.basis();
  const int d = theta.d();
  double total = 0.0;
  for (std::size_t k = 0; k < s.N; ++k) {
    const auto x = s.row(k);
    double lap_h = 0.0;
    for (double v : x) lap_h -= (d + 1) * d * power(v, d - 1);
    const double trace = lap_h + theta.theta().dot(eval_laplacian(basis, x));
    total += trace + 0.5 * score(theta, x).squaredNorm();
  }
  return total / static_cast<double>(s.N);
}

FitReport fit_score_matching(const SampleSet& s, const BasisPtr& basis) {
  const auto t0 = Clock::now();
  const SmStatistics st = sm_statistics(s, *basis);
  FitReport r;
  r.estimator = Estimator::SM;
  r.N = s.N;
  r.gram_condition = condition_number(st.G);

  Eigen::LLT<Eigen::MatrixXd> llt(st.G);
  const bool plain_ok = llt.info() == Eigen::Success && std::isfinite(r.gram_condition) && r.gram_condition < 1e14;
  if (plain_ok) {
    r.theta_hat = -llt.solve(st.b);
  } else {
    const double trace = st.G.trace();
    const double lambda = kRidgeScale * trace / static_cast<double>(basis->size());
    Eigen::MatrixXd ridged = st.G;
    ridged.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt2(ridged);
    if (!(trace > 0.0) || llt2.info() != Eigen::Success) {
      throw NumericalError("score-matching Gram matrix is singular beyond ridge rescue; null directions: " +
                           null_directions(st.G, *basis));
    }
    r.theta_hat = -llt2.solve(st.b);
    std::ostringstream note;
    note << "Gram matrix ill-conditioned (condition " << r.gram_condition << "); ridge " << lambda
         << " applied; null directions: " << null_directions(st.G, *basis);
    r.notes.push_back(note.str());
    r.gram_condition = condition_number(ridged);
  }
  if (!r.theta_hat.allFinite()) throw NumericalError("score-matching solve produced non-finite coefficients");
  r.loss = st.c + r.theta_hat.dot(st.b) + 0.5 * r.theta_hat.dot(st.G * r.theta_hat);
  r.grad_norm = (st.G * r.theta_hat + st.b).norm();
  r.wall_time = seconds_since(t0);
  return r;
}

// --- maximum likelihood ----------------------------------------------------------------

namespace {

struct SufficientStats {
  Eigen::VectorXd mean_T;
  double mean_log_h = 0.0;
};

SufficientStats sufficient_stats(const SampleSet& s, const MonomialBasis& basis) {
  require_samples(s, basis.n());
  SufficientStats st;
  st.mean_T = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < s.N; ++k) {
    st.mean_T += eval_suffstats(basis, s.row(k));
    st.mean_log_h += log_base_measure(basis.d(), s.row(k));
  }
  st.mean_T /= static_cast<double>(s.N);
  st.mean_log_h /= static_cast<double>(s.N);
  return st;
}

MleLoss evaluate(const ParamVector& p, const SufficientStats& st, const QuadratureGrid& grid) {
  const MomentTable table = moment_table(p, grid, p.d());
  MleLoss out;
  out.loss = st.mean_log_h + p.theta().dot(st.mean_T) - table.log_z();
  out.grad = st.mean_T - mean_T_from(table, p.basis());
  return out;
}

}  // namespace

MleLoss mle_loss_and_grad(const ParamVector& theta, const SampleSet& s, const QuadratureGrid& grid) {
  const GateReport gate = grid_gate(theta, grid);
  if (!gate.converged) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "grid gate failed at theta: log Z " << gate.value << " vs " << gate.value_doubled;
    throw GridNotConverged(msg.str());
  }
  return evaluate(theta, sufficient_stats(s, theta.basis()), grid);
}

FitReport fit_mle(const SampleSet& s, const BasisPtr& basis, const QuadratureGrid& grid_in,
                  const Eigen::VectorXd& init, const MleOptions& opt) {
  const auto t0 = Clock::now();
  if (static_cast<std::size_t>(init.size()) != basis->size()) {
    throw std::invalid_argument("fit_mle: init has the wrong length");
  }
  const SufficientStats st = sufficient_stats(s, *basis);
  QuadratureGrid grid = grid_in;
  FitReport r;
  r.estimator = Estimator::MLE;
  r.N = s.N;

  Eigen::VectorXd theta = init;
  MleLoss cur = evaluate(ParamVector::unconstrained(basis, theta), st, grid);
  double step = 1.0;
  int regrids = 0;
  std::size_t it = 0;
  for (;;) {
    while (it < opt.max_iter && cur.grad.cwiseAbs().maxCoeff() > opt.tol) {
      ++it;
      const double g2 = cur.grad.squaredNorm();
      step = std::min(2.0 * step, 1e6);
      bool accepted = false;
      while (step > 1e-300) {
        const Eigen::VectorXd cand = theta + step * cur.grad;
        try {
          const MleLoss next = evaluate(ParamVector::unconstrained(basis, cand), st, grid);
          if (std::isfinite(next.loss) && next.loss >= cur.loss + opt.armijo * step * g2) {
            theta = cand;
            cur = next;
            accepted = true;
            break;
          }
        } catch (const NumericalError&) {
          // Treated like a failed Armijo test.
        }
        step *= opt.shrink;
      }
      if (!accepted) break;
    }
    const double gnorm = cur.grad.cwiseAbs().maxCoeff();
    if (gnorm > opt.tol) {
      std::ostringstream msg;
      msg << "MLE did not reach ||grad||_inf <= " << opt.tol << " within " << it << " iterations (||grad||_inf = "
          << gnorm << ")";
      throw ConvergenceError(msg.str());
    }
    const ParamVector p_hat = ParamVector::unconstrained(basis, theta);
    const GateReport gate = grid_gate(p_hat, grid);
    if (gate.converged) break;
    if (!opt.regrid || regrids >= 3) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "grid gate failed at the MLE: log Z " << gate.value << " vs " << gate.value_doubled;
      throw GridNotConverged(msg.str());
    }
    ++regrids;
    grid = resolve_grid(p_hat).grid;
    r.notes.push_back("grid rebuilt around the iterate after the gate failed");
    cur = evaluate(p_hat, st, grid);
  }

  const ParamVector p_hat = ParamVector::unconstrained(basis, theta);
  const MomentTable table = moment_table(p_hat, grid, 2 * p_hat.d());
  const Eigen::VectorXd mean = mean_T_from(table, *basis);
  r.gram_condition = condition_number(second_T_from(table, *basis) - mean * mean.transpose());
  r.theta_hat = theta;
  r.loss = cur.loss;
  r.iterations = it;
  r.grad_norm = cur.grad.cwiseAbs().maxCoeff();
  r.wall_time = seconds_since(t0);
  return r;
}

// --- convergence studies ---------------------------------------------------------------

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope needs >= 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

}  // namespace

StudyResult convergence_study(const ParamVector& theta_star, const std::vector<std::size_t>& Ns, std::size_t trials,
                              const std::vector<Estimator>& estimators, std::uint64_t seed,
                              const StudyOptions& options) {
  if (trials == 0) throw std::invalid_argument("convergence_study: trials must be positive");
  if (Ns.empty()) throw std::invalid_argument("convergence_study: Ns is empty");
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    if (Ns[i] == 0 || (i > 0 && Ns[i] <= Ns[i - 1])) {
      throw std::invalid_argument("convergence_study: Ns must be positive and increasing");
    }
  }
  if (estimators.empty()) throw std::invalid_argument("convergence_study: no estimator selected");

  const bool exact = is_separable(theta_star);
  const bool need_mle = std::find(estimators.begin(), estimators.end(), Estimator::MLE) != estimators.end();
  std::optional<QuadratureGrid> grid;
  if (need_mle) grid = resolve_grid(theta_star).grid;

  StudyResult result;
  if (!exact) result.notes.push_back("theta_star couples coordinates; samples drawn by MALA");
  if (trials == 1) result.notes.push_back("single trial per N: slope carries no spread estimate (wide CI)");

  const std::size_t jobs = Ns.size() * trials;
  std::vector<std::vector<StudyRow>> job_rows(jobs);
  std::vector<std::vector<std::string>> job_notes(jobs);
  const Eigen::VectorXd init = Eigen::VectorXd::Zero(theta_star.theta().size());
  parallel_chunks(jobs, [&](std::size_t job) {
    const std::size_t ni = job / trials;
    const std::size_t trial = job % trials;
    const std::size_t N = Ns[ni];
    const std::uint64_t s = derive_seed(seed, N, trial);
    const SampleSet samples = exact ? sample_exact_separable(theta_star, N, s)
                                    : sample_mala(theta_star, N, options.mcmc, s);
    for (Estimator e : estimators) {
      const FitReport fit = e == Estimator::SM
                                ? fit_score_matching(samples, theta_star.basis_ptr())
                                : fit_mle(samples, theta_star.basis_ptr(), *grid, init, options.mle);
      StudyRow row{e, theta_star.n(), theta_star.d(), theta_star.B(), N, trial,
                   (fit.theta_hat - theta_star.theta()).squaredNorm(), fit.wall_time};
      job_rows[job].push_back(row);
      for (const auto& note : fit.notes) {
        job_notes[job].push_back(to_string(e) + " N=" + std::to_string(N) + " trial=" + std::to_string(trial) +
                                 ": " + note);
      }
    }
  });
  for (std::size_t job = 0; job < jobs; ++job) {
    result.rows.insert(result.rows.end(), job_rows[job].begin(), job_rows[job].end());
    result.notes.insert(result.notes.end(), job_notes[job].begin(), job_notes[job].end());
  }

  for (Estimator e : estimators) {
    StudySummary sum{e, Ns, {}, 0.0};
    for (std::size_t N : Ns) {
      std::vector<double> errs;
      for (const auto& row : result.rows) {
        if (row.estimator == e && row.N == N) errs.push_back(row.error_sq);
      }
      sum.median_error_sq.push_back(median(errs));
    }
    if (Ns.size() >= 2) {
      std::vector<double> xs(Ns.begin(), Ns.end());
      sum.slope = loglog_slope(xs, sum.median_error_sq);
    }
    result.summaries.push_back(sum);
  }
  if (result.summaries.size() == 2) {
    const auto& a = result.summaries[0].estimator == Estimator::SM ? result.summaries[0] : result.summaries[1];
    const auto& b = result.summaries[0].estimator == Estimator::SM ? result.summaries[1] : result.summaries[0];
    for (std::size_t i = 0; i < Ns.size(); ++i) result.ratio_sm_mle.push_back(a.median_error_sq[i] / b.median_error_sq[i]);
  }
  return result;
}

std::string study_csv(const StudyResult& r) {
  std::string out = "estimator,n,d,B,N,trial,error_sq,wall_time_s\n";
  char buf[256];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%d,%.17g,%zu,%zu,%.17g,%.6f\n", to_string(row.estimator).c_str(), row.n,
                  row.d, row.B, row.N, row.trial, row.error_sq, row.wall_time_s);
    out += buf;
  }
  return out;
}

}  // namespace polyscore
