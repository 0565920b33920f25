// Acceptance run: one PASS/FAIL line per criterion. Each criterion builds a
// report without timing; the determinism criterion reruns the others with the
// same seeds and compares the serialized reports byte for byte.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "polyscore/estimators.hpp"
#include "polyscore/fisher.hpp"
#include "polyscore/hardness.hpp"
#include "polyscore/json_io.hpp"
#include "polyscore/parallel.hpp"
#include "polyscore/rng.hpp"

using namespace polyscore;

namespace {

const std::string kData = POLYSCORE_TESTDATA;

struct Outcome {
  bool pass = false;
  std::string summary;
  Json report;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Eigen::VectorXd uniform_theta(RandomStream& rng, std::size_t m, double B) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(m));
  for (auto& v : t) v = B * (2.0 * rng.uniform() - 1.0);
  return t;
}

SampleSet draw(const ParamVector& p, std::size_t N, std::uint64_t seed) {
  return is_separable(p) ? sample_exact_separable(p, N, seed) : sample_mala(p, N, McmcConfig{}, seed);
}

// 1. Closed-form score matching is the minimizer of the empirical loss.
Outcome sm_closed_form() {
  RandomStream rng(101, 0);
  double worst_gap = std::numeric_limits<double>::infinity();
  double worst_residual = 0.0;
  bool pass = true;
  Json rows = Json::array();
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = 1 + inst % 2;
    auto basis = make_basis(n, 3);
    const ParamVector star(basis, uniform_theta(rng, basis->size(), 1.0), 1.0);
    const SampleSet s = draw(star, 1000, derive_seed(101, static_cast<std::uint64_t>(inst)));
    const FitReport fit = fit_score_matching(s, basis);
    const double best = sm_loss(ParamVector::unconstrained(basis, fit.theta_hat), s);
    const double slack = 1e-10 * std::max(1.0, std::abs(best));
    for (int k = 0; k < 100; ++k) {
      // Half the probes are global, half are small perturbations of the estimate.
      Eigen::VectorXd probe = k % 2 ? uniform_theta(rng, basis->size(), 3.0) : fit.theta_hat;
      if (k % 2 == 0) {
        for (auto& v : probe) v += 1e-3 * rng.normal();
      }
      const double gap = sm_loss(ParamVector::unconstrained(basis, probe), s) - best;
      worst_gap = std::min(worst_gap, gap);
      pass = pass && gap >= -slack;
    }
    const SmStatistics st = sm_statistics(s, *basis);
    const double residual = (st.G * fit.theta_hat + st.b).norm() / (1.0 + fit.theta_hat.norm());
    worst_residual = std::max(worst_residual, residual);
    pass = pass && residual <= 1e-8;
    rows.push_back(Json{{"n", n}, {"loss", best}, {"relative_residual", residual}});
  }
  return {pass, fmt("min probe loss gap %.3g (>= 0 required), max residual/(1+|theta|) %.3g <= 1e-8", worst_gap,
                    worst_residual),
          Json{{"instances", rows}, {"min_probe_gap", worst_gap}, {"max_relative_residual", worst_residual}}};
}

// 2. Error decays like 1/N for both estimators on the Gaussian subfamily.
Outcome one_over_n() {
  auto basis = make_basis(1, 1);
  const ParamVector star(basis, Eigen::VectorXd::Ones(1), 1.0);
  const StudyResult r = convergence_study(star, {100, 1000, 10000, 100000}, 20, {Estimator::SM, Estimator::MLE}, 202);
  bool pass = r.summaries.size() == 2;
  std::string text;
  for (const auto& s : r.summaries) {
    pass = pass && s.slope >= -1.3 && s.slope <= -0.7;
    text += to_string(s.estimator) + " slope " + fmt("%.3f", s.slope) + ", ";
  }
  double worst_ratio = 0.0;
  for (double q : r.ratio_sm_mle) worst_ratio = std::max(worst_ratio, q);
  pass = pass && r.ratio_sm_mle.size() == 4 && worst_ratio <= 10.0;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"estimator", to_string(row.estimator)}, {"N", row.N}, {"trial", row.trial},
                        {"error_sq", row.error_sq}});
  }
  Json report = to_json(r);
  report["rows"] = rows;
  return {pass, text + fmt("max SM/MLE median ratio %.3f <= 10", worst_ratio), report};
}

// 3. Fisher information and Poincare constant on the Gaussian member; the
// condition-number bound on C_P across random cubic members.
Outcome fisher_pipeline() {
  auto b11 = make_basis(1, 1);
  const auto p0 = ParamVector::zero(b11);
  const auto g0 = resolve_grid(p0).grid;
  const double I = fisher_info(p0, g0)(0, 0);
  const double cp = restricted_poincare(fisher_info(p0, g0), score_gram(p0, g0));
  bool pass = std::abs(I - 0.5) <= 1e-6 && std::abs(cp - 0.5) <= 1e-6;
  RandomStream rng(303, 0);
  auto b13 = make_basis(1, 3);
  int held = 0;
  Json rows = Json::array();
  for (int k = 0; k < 20; ++k) {
    const ParamVector p(b13, uniform_theta(rng, 3, 1.0), 1.0);
    const SpectralReport r = verify_bounds(p, resolve_grid(p).grid, {.seed = static_cast<std::uint64_t>(k)});
    const Check& vii = r.checks.back();
    held += vii.holds;
    rows.push_back(to_json(vii));
  }
  pass = pass && held == 20;
  return {pass, fmt("I = %.9f, C_P = %.9f (0.5 +- 1e-6); Poincare condition bound held %.0f/20", I, cp, held),
          Json{{"fisher", I}, {"C_P", cp}, {"poincare_condition", rows}}};
}

// 4. Monte Carlo covariance of the score-matching estimator against the bound.
Outcome koehler_bound() {
  RandomStream rng(404, 0);
  auto basis = make_basis(1, 3);
  const ParamVector star(basis, uniform_theta(rng, 3, 1.0), 1.0);
  const auto grid = resolve_grid(star).grid;
  const SpectralReport spec = verify_bounds(star, grid, {.seed = 4});
  const std::size_t trials = 200, N = 10000;
  std::vector<Eigen::VectorXd> est(trials);
  parallel_chunks(trials, [&](std::size_t t) {
    est[t] = fit_score_matching(sample_exact_separable(star, N, derive_seed(404, t)), basis).theta_hat;
  });
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
  for (const auto& e : est) mean += e;
  mean /= static_cast<double>(trials);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3, 3);
  for (const auto& e : est) cov += (e - mean) * (e - mean).transpose();
  cov *= static_cast<double>(N) / static_cast<double>(trials - 1);
  const double empirical = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov).eigenvalues().maxCoeff();
  const Eigen::MatrixXd sandwich = sm_asymptotic_covariance(star, grid);
  const double asymptotic = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sandwich).eigenvalues().maxCoeff();
  const std::vector<Check> pre = regularity_preflight(star, grid);
  const bool pass = all_hold(pre) && std::isfinite(spec.gamma_bound) && empirical <= spec.gamma_bound;
  return {pass,
          fmt("||N Cov(theta_SM)||_op = %.4g (asymptotic %.4g) <= gamma bound %.4g", empirical, asymptotic,
              spec.gamma_bound),
          Json{{"theta_star", theta_to_json(star)},
               {"empirical_op_norm", empirical},
               {"asymptotic_op_norm", asymptotic},
               {"gamma_bound", spec.gamma_bound},
               {"C_P", spec.C_P},
               {"lambda_min", spec.lambda_min},
               {"regularity", to_json(pre)}}};
}

// 5. Appendix bounds on random members.
Outcome appendix_bounds() {
  RandomStream rng(505, 0);
  bool pass = true;
  int held = 0;
  Json rows = Json::array();
  for (int k = 0; k < 10; ++k) {
    const std::size_t n = 1 + k % 2;
    const int d = (k / 2) % 2 ? 3 : 1;
    const double B = (k / 4) % 2 ? 2.0 : 1.0;
    auto basis = make_basis(n, d);
    const ParamVector p(basis, uniform_theta(rng, basis->size(), B), B);
    const SpectralReport r = verify_bounds(p, resolve_grid(p).grid, {.seed = static_cast<std::uint64_t>(k)});
    const bool ok = all_hold(r.checks);
    held += ok;
    pass = pass && ok;
    rows.push_back(Json{{"n", n}, {"d", d}, {"B", B}, {"report", to_json(r)}});
  }
  return {pass, fmt("all seven checks held on %.0f/10 members", held), Json{{"members", rows}}};
}

// 6. Monomial-norm versus L2 inequality and the Legendre round trip.
Outcome mon_l2() {
  RandomStream rng(606, 0);
  bool holds = true;
  double worst_ratio = 0.0, worst_roundtrip = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + k % 3;
    const int d = 1 + (k / 3) % 5;
    PolyCoeffs f(n);
    f.add_term(MultiIndex::zero(n), rng.normal());
    for (int t = 1; t <= d; ++t) {
      for (const auto& m : indices_of_degree(n, t)) f.add_term(m, rng.normal());
    }
    const Check c = check_mon_l2_bound(f, n, d);
    holds = holds && c.holds;
    worst_ratio = std::max(worst_ratio, c.lhs / c.rhs);
    const PolyCoeffs back = from_legendre(n, to_legendre(f, d), d);
    for (const auto& [m, v] : f.terms()) worst_roundtrip = std::max(worst_roundtrip, std::abs(back.coeff(m) - v));
  }
  const bool pass = holds && worst_roundtrip <= 1e-9;
  return {pass, fmt("max ||f||_m^2 / bound = %.3g (<= 1), round-trip error %.3g <= 1e-9", worst_ratio, worst_roundtrip),
          Json{{"max_ratio", worst_ratio}, {"max_roundtrip_error", worst_roundtrip}}};
}

// 7. Hardness construction.
Outcome hardness() {
  bool roots_ok = true, bound_ok = true;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const std::size_t n = 3 + k % 10;
    const std::size_t m = 1 + derive_seed(707, k) % (4 * n);
    const CnfFormula f = random_cnf(n, m, derive_seed(707, k, 1));
    const double alpha = 0.5 + static_cast<double>(k % 5), beta = 0.5 + static_cast<double>(k % 3);
    const EncodedInstance inst = encode(f, alpha, beta);
    roots_ok = roots_ok && verify_roots(inst, k).holds;
    bound_ok = bound_ok && inst.theta.theta().cwiseAbs().maxCoeff() <= 64.0 * static_cast<double>(m) * alpha + 2 * beta;
  }
  const CnfFormula sat = read_dimacs(kData + "/sat3.cnf"), unsat = read_dimacs(kData + "/unsat3.cnf");
  const CnfFormula uniq = read_dimacs(kData + "/uniq3.cnf"), one = read_dimacs(kData + "/clause1.cnf");
  const HardnessParams pz = default_params(3, sat.m(), parse_param_mode("zeroth"));
  const ZGapReport z = zgap_experiment(sat, unsat, pz.alpha, pz.beta);
  const HardnessParams pf = default_params(3, uniq.m(), parse_param_mode("first"));
  const MeanSignReport ms = mean_sign_experiment(uniq, pf.alpha, pf.beta);
  const HardnessParams ps = default_params(3, one.m(), parse_param_mode("sampling"));
  const OrthantReport om = orthant_mass(one, ps.alpha, ps.beta);
  const bool orth_ok = om.half_mass && om.half_mass->holds;
  const bool pass = roots_ok && bound_ok && z.separation.holds && ms.recovered_matches && ms.margin.holds && orth_ok;
  std::string text = std::string("roots ") + (roots_ok ? "exact" : "MISMATCH") + ", coefficient bound " +
                     (bound_ok ? "held" : "FAILED") + fmt(", log Z gap %.4g > %.4g", z.gap, z.threshold) +
                     fmt(", mean-sign margin %.4f >= 0.05", ms.min_margin) + fmt(", orthant mass %.6f >= 0.5", om.mass_on_sat);
  return {pass, text,
          Json{{"roots_exact", roots_ok},
               {"coefficient_bound", bound_ok},
               {"zgap", to_json(z)},
               {"mean_sign", to_json(ms)},
               {"orthant_mass", to_json(om)}}};
}

// 8. One-dimensional integral lemmas.
Outcome integrals() {
  struct Triple {
    double beta, r;
    int m;
  };
  const Triple triples[] = {{2e5, 0.035, 1}, {1e6, 0.02, 4}, {5e6, 0.01, 10}};
  bool pass = true;
  Json conc = Json::array();
  for (const auto& t : triples) {
    const auto c = verify_int_concentration(t.beta, t.r, t.m);
    pass = pass && all_hold(c);
    conc.push_back(Json{{"beta", t.beta}, {"r", t.r}, {"m", t.m}, {"checks", to_json(c)}});
  }
  Json mom = Json::array();
  for (double beta : {400.0, 1e3, 1e4}) {
    const auto c = verify_1d_moment_bound(beta);
    pass = pass && all_hold(c);
    mom.push_back(Json{{"beta", beta}, {"checks", to_json(c)}});
  }
  return {pass, pass ? "concentration at 3 triples and moment bound k <= 8 hold" : "a 1-D integral check failed",
          Json{{"concentration", conc}, {"moment_bound", mom}}};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{sm_closed_form, one_over_n, fisher_pipeline, koehler_bound,
                                                       appendix_bounds, mon_l2,     hardness,        integrals};
  std::vector<std::string> first(criteria.size());
  bool all = true;
  Json reports = Json::array();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what(), Json{{"error", e.what()}}};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    first[i] = o.report.dump();
    reports.push_back(o.report);
    all = all && o.pass;
    std::printf("criterion %zu: %s  %s  [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", o.summary.c_str(), secs);
    std::fflush(stdout);
  }

  // 9. Determinism: rerun with identical seeds and compare reports.
  std::size_t identical = 0;
  std::string differing;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string again;
    try {
      again = criteria[i]().report.dump();
    } catch (const std::exception& e) {
      again = Json{{"error", e.what()}}.dump();
    }
    if (again == first[i]) {
      ++identical;
    } else {
      differing += " " + std::to_string(i + 1);
    }
  }
  const bool det = identical == criteria.size();
  all = all && det;
  std::printf("criterion 9: %s  %zu/%zu reports byte-identical on rerun%s\n", det ? "PASS" : "FAIL", identical,
              criteria.size(), det ? "" : (" (differ:" + differing + ")").c_str());
  if (argc > 1) write_text_file(argv[1], reports.dump(2) + "\n");
  return all ? 0 : 1;
}
