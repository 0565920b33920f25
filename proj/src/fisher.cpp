#include "polyscore/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "polyscore/errors.hpp"
#include "polyscore/rng.hpp"

namespace polyscore {

namespace {

MomentTable gated_table(const ParamVector& p, const QuadratureGrid& grid, int max_total) {
  const GateReport gate = grid_gate(p, grid);
  if (!gate.converged) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "grid gate failed: log Z " << gate.value << " vs " << gate.value_doubled << " on the doubled grid";
    throw GridNotConverged(msg.str());
  }
  return moment_table(p, grid, max_total);
}

Eigen::MatrixXd covariance_from(const MomentTable& table, const MonomialBasis& basis) {
  const Eigen::VectorXd m = mean_T_from(table, basis);
  Eigen::MatrixXd I = second_T_from(table, basis) - m * m.transpose();
  return 0.5 * (I + I.transpose());
}

Eigen::MatrixXd gram_from(const MomentTable& table, const MonomialBasis& basis) {
  const std::size_t m = basis.size();
  const std::size_t n = basis.n();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  std::vector<int> e(n);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const int da = basis.exponent(a, i), db = basis.exponent(b, i);
        if (da == 0 || db == 0) continue;
        for (std::size_t k = 0; k < n; ++k) e[k] = basis.exponent(a, k) + basis.exponent(b, k);
        e[i] -= 2;
        s += da * db * table.at(e);
      }
      G(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = s;
      G(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = s;
    }
  }
  return G;
}

double op_norm(const Eigen::MatrixXd& J) {
  if (J.cols() == 1) return J.norm();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J.transpose() * J, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

void smoothness_at(const ParamVector& p, std::span<const double> x, std::span<double> out) {
  const int d = p.d();
  const Eigen::MatrixXd J = eval_jacobian(p.basis(), x);
  const double op = op_norm(J);
  double g2 = 0.0;
  for (double v : x) {
    const double g = (d + 1) * std::pow(v, d);
    g2 += g * g;
  }
  out[0] = op * op * op * op;
  out[1] = eval_laplacian(p.basis(), x).squaredNorm();
  out[2] = g2 * g2;
}

std::string null_directions(const Eigen::MatrixXd& G, const MonomialBasis* basis) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  std::ostringstream out;
  bool first = true;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    if (es.eigenvalues()[k] > 1e-12 * top) continue;
    Eigen::Index arg = 0;
    es.eigenvectors().col(k).cwiseAbs().maxCoeff(&arg);
    out << (first ? "" : ", ");
    if (basis) {
      out << "x^(" << (*basis)[static_cast<std::size_t>(arg)].key() << ")";
    } else {
      out << "coordinate " << arg;
    }
    first = false;
  }
  return first ? std::string("none detected") : out.str();
}

}  // namespace

Eigen::MatrixXd fisher_info(const ParamVector& p, const QuadratureGrid& grid) {
  return covariance_from(gated_table(p, grid, 2 * p.d()), p.basis());
}

Eigen::MatrixXd fisher_info(const ParamVector& p, const SampleSet& s) {
  if (s.N == 0) throw std::invalid_argument("fisher_info: sample set is empty");
  if (s.n != p.n()) throw std::invalid_argument("fisher_info: sample dimension does not match the family");
  const auto m = static_cast<Eigen::Index>(p.basis().size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t k = 0; k < s.N; ++k) {
    const Eigen::VectorXd t = eval_suffstats(p.basis(), s.row(k));
    mean += t;
    second.noalias() += t * t.transpose();
  }
  const double inv = 1.0 / static_cast<double>(s.N);
  mean *= inv;
  Eigen::MatrixXd I = second * inv - mean * mean.transpose();
  return 0.5 * (I + I.transpose());
}

Eigen::MatrixXd score_gram(const ParamVector& p, const QuadratureGrid& grid) {
  return gram_from(gated_table(p, grid, 2 * p.d()), p.basis());
}

Spectrum psd_spectrum(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  Spectrum s;
  s.eigenvalues = es.eigenvalues();
  for (auto& v : s.eigenvalues) {
    if (v >= 0.0) continue;
    if (v < -kEigenClipTol) {
      std::ostringstream msg;
      msg << "covariance matrix has eigenvalue " << v << ", below the roundoff allowance " << -kEigenClipTol;
      throw NumericalError(msg.str());
    }
    std::ostringstream note;
    note << "eigenvalue " << v << " clipped to 0";
    s.notes.push_back(note.str());
    v = 0.0;
  }
  return s;
}

PoincareResult poincare_pencil(const Eigen::MatrixXd& I, const Eigen::MatrixXd& G, const MonomialBasis* basis) {
  if (I.rows() != I.cols() || G.rows() != G.cols() || I.rows() != G.rows()) {
    throw std::invalid_argument("poincare_pencil: I and G must be square of equal size");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("gradient Gram matrix is not positive definite; null directions: " +
                         null_directions(G, basis));
  }
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::MatrixXd Linv_I = L.triangularView<Eigen::Lower>().solve(I);
  Eigen::MatrixXd A = L.triangularView<Eigen::Lower>().solve(Linv_I.transpose());
  A = 0.5 * (A + A.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const Eigen::Index top = A.rows() - 1;
  PoincareResult r;
  r.C_P = std::max(0.0, es.eigenvalues()[top]);
  r.w = L.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors().col(top));
  return r;
}

double restricted_poincare(const Eigen::MatrixXd& I, const Eigen::MatrixXd& G) { return poincare_pencil(I, G).C_P; }

SmoothnessMoments smoothness_moments(const ParamVector& p, const QuadratureGrid& grid) {
  const GateReport gate = grid_gate(p, grid);
  if (!gate.converged) throw GridNotConverged("grid gate failed while computing smoothness moments");
  const auto e = nodewise_expectation(p, grid, 3, [&](std::span<const double> x, std::span<double> out) {
    smoothness_at(p, x, out);
  });
  return {e.value[0], e.value[1], e.value[2]};
}

SmoothnessMoments smoothness_moments(const ParamVector& p, const SampleSet& s) {
  if (s.N == 0 || s.n != p.n()) throw std::invalid_argument("smoothness_moments: incompatible sample set");
  double acc[3] = {0.0, 0.0, 0.0};
  double out[3];
  for (std::size_t k = 0; k < s.N; ++k) {
    smoothness_at(p, s.row(k), out);
    for (int i = 0; i < 3; ++i) acc[i] += out[i];
  }
  const double inv = 1.0 / static_cast<double>(s.N);
  return {acc[0] * inv, acc[1] * inv, acc[2] * inv};
}

double gamma_bound(const ParamVector& p, double C_P, double lambda_min, const SmoothnessMoments& m) {
  if (!(lambda_min > 0.0)) throw std::invalid_argument("gamma_bound: lambda_min must be positive");
  if (!(C_P >= 0.0)) throw std::invalid_argument("gamma_bound: C_P must be nonnegative");
  return 2.0 * C_P * C_P * (p.theta().squaredNorm() * m.E_opJT4 + m.E_dT2) / (lambda_min * lambda_min);
}

Eigen::MatrixXd sm_asymptotic_covariance(const ParamVector& p, const QuadratureGrid& grid) {
  const MomentTable table = gated_table(p, grid, 2 * p.d());
  const Eigen::MatrixXd G = gram_from(table, p.basis());
  const std::size_t m = p.basis().size();
  const int d = p.d();
  const std::size_t k = m + m * (m + 1) / 2;
  const auto e = nodewise_expectation(p, grid, k, [&](std::span<const double> x, std::span<double> out) {
    const Eigen::MatrixXd J = eval_jacobian(p.basis(), x);
    Eigen::VectorXd gh(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) gh[static_cast<Eigen::Index>(i)] = -(d + 1) * std::pow(x[i], d);
    const Eigen::VectorXd psi = J * (J.transpose() * p.theta()) + eval_laplacian(p.basis(), x) + J * gh;
    std::size_t at = 0;
    for (std::size_t a = 0; a < m; ++a) out[at++] = psi[static_cast<Eigen::Index>(a)];
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a; b < m; ++b) out[at++] = psi[static_cast<Eigen::Index>(a)] * psi[static_cast<Eigen::Index>(b)];
    }
  });
  const auto mm = static_cast<Eigen::Index>(m);
  const Eigen::VectorXd mean = e.value.head(mm);
  Eigen::MatrixXd S(mm, mm);
  Eigen::Index at = mm;
  for (Eigen::Index a = 0; a < mm; ++a) {
    for (Eigen::Index b = a; b < mm; ++b) S(a, b) = S(b, a) = e.value[at++];
  }
  S -= mean * mean.transpose();
  const Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) throw NumericalError("gradient Gram matrix is not positive definite");
  const Eigen::MatrixXd Ginv_S = llt.solve(S);
  Eigen::MatrixXd Gamma = llt.solve(Ginv_S.transpose());
  return 0.5 * (Gamma + Gamma.transpose());
}

std::vector<Check> regularity_preflight(const ParamVector& p, const QuadratureGrid& grid) {
  const SmoothnessMoments m = smoothness_moments(p, grid);
  auto finite = [](const char* name, double v) {
    return Check{name, v, std::numeric_limits<double>::infinity(), std::isfinite(v)};
  };
  return {finite("E_grad_log_h4_finite", m.E_grad_log_h4), finite("E_laplacian_T2_finite", m.E_dT2),
          finite("E_opJT4_finite", m.E_opJT4)};
}

SpectralReport verify_bounds(const ParamVector& p, const QuadratureGrid& grid, const VerifyBoundsOptions& opt) {
  const MonomialBasis& basis = p.basis();
  const int d = p.d();
  const double n = static_cast<double>(p.n());
  const double B = p.B();
  const double M = static_cast<double>(basis.M());
  const MomentTable table = gated_table(p, grid, 2 * d);
  const Eigen::VectorXd mean = mean_T_from(table, basis);
  Eigen::MatrixXd I = covariance_from(table, basis);
  const Eigen::MatrixXd G = gram_from(table, basis);

  SpectralReport r;
  Eigen::VectorXd eig;
  if (opt.corrupt_fisher) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(I);
    Eigen::VectorXd lam = es.eigenvalues();
    lam[0] = -lam[0];
    I = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    I = 0.5 * (I + I.transpose()).eval();
    eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(I, Eigen::EigenvaluesOnly).eigenvalues();
    r.notes.push_back("fault injection: smallest Fisher eigenvalue negated");
  } else {
    Spectrum s = psd_spectrum(I);
    eig = s.eigenvalues;
    r.notes.insert(r.notes.end(), s.notes.begin(), s.notes.end());
  }
  r.lambda_min = eig.minCoeff();
  r.lambda_max = eig.maxCoeff();
  r.C_P = poincare_pencil(I, G, &basis).C_P;

  const SmoothnessMoments sm = smoothness_moments(p, grid);
  if (r.lambda_min > 0.0) {
    r.gamma_bound = gamma_bound(p, r.C_P, r.lambda_min, sm);
  } else {
    r.gamma_bound = std::numeric_limits<double>::quiet_NaN();
    r.notes.push_back("gamma bound undefined: lambda_min <= 0");
  }

  const double base = std::pow(B, 2 * d) * std::pow(2.0, 2 * d * (d + 1) + 1);
  const double eig_bound = base * std::pow(M, 2 * d + 1);
  const double mean_sq = mean.squaredNorm();
  r.checks.push_back({"lambda_max_bound", r.lambda_max, eig_bound, r.lambda_max <= eig_bound});
  const double mean_bound = base * std::pow(M, 2 * d + 2);
  r.checks.push_back({"mean_T_norm_bound", mean_sq, mean_bound, mean_sq <= mean_bound});
  const double lap_bound = std::pow(d, 4) * eig_bound;
  r.checks.push_back({"laplacian_T_bound", sm.E_dT2, lap_bound, sm.E_dT2 <= lap_bound});
  r.checks.push_back({"lambda_min_positive", r.lambda_min, 0.0, r.lambda_min > 0.0});

  // Random constant-free polynomials f = <w, T>.
  RandomStream rng(opt.seed, 0);
  const auto m = static_cast<Eigen::Index>(basis.size());
  std::vector<Eigen::VectorXd> probes(opt.probes, Eigen::VectorXd(m));
  for (auto& w : probes) {
    for (auto& v : w) v = rng.normal();
  }

  // Var_p(f) >= ||f||^2 / D with D from the variance lower bound, in logs.
  const double R = tail_radius(p.n(), d, B);
  const double log_den = 2 * d * std::log(2.0) + 2 * d * std::log(d + 1.0) + (d + 1) * std::log(4 * std::numbers::e) +
                         (2 * d + 3) * std::log(M) + (2.0 * d * d + 2 * d) * std::log(R) + 2 * d * std::log(n + B);
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (const auto& w : probes) worst_ratio = std::min(worst_ratio, w.dot(I * w) / w.squaredNorm());
  const double var_rhs = std::exp(-log_den);
  r.checks.push_back({"variance_lower_bound", worst_ratio, var_rhs, worst_ratio >= var_rhs});

  // Var_p(<w,T>) computed node by node against w^T I w.
  const std::size_t k = 2 * probes.size();
  double worst_gap = 0.0;
  if (k > 0) {
    Eigen::MatrixXd W(m, static_cast<Eigen::Index>(probes.size()));
    for (std::size_t j = 0; j < probes.size(); ++j) W.col(static_cast<Eigen::Index>(j)) = probes[j];
    const auto e = nodewise_expectation(p, grid, k, [&](std::span<const double> x, std::span<double> out) {
      const Eigen::VectorXd f = W.transpose() * eval_suffstats(basis, x);
      for (Eigen::Index j = 0; j < f.size(); ++j) {
        out[static_cast<std::size_t>(2 * j)] = f[j];
        out[static_cast<std::size_t>(2 * j + 1)] = f[j] * f[j];
      }
    });
    for (std::size_t j = 0; j < probes.size(); ++j) {
      const double ef = e.value[static_cast<Eigen::Index>(2 * j)];
      const double var = e.value[static_cast<Eigen::Index>(2 * j + 1)] - ef * ef;
      const double quad = probes[j].dot(I * probes[j]);
      worst_gap = std::max(worst_gap, std::abs(var - quad) / std::max(1.0, std::abs(quad)));
    }
  }
  r.checks.push_back({"variance_identity", worst_gap, 1e-8, worst_gap <= 1e-8});

  const double cp_bound = (4.0 + 4.0 * mean_sq) * r.lambda_max / std::min(1.0, r.lambda_min);
  const bool cp_holds = r.lambda_min > 0.0 && r.C_P <= cp_bound;
  r.checks.push_back({"poincare_condition_bound", r.C_P, cp_bound, cp_holds});
  return r;
}

}  // namespace polyscore
