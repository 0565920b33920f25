#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polyscore/errors.hpp"
#include "polyscore/estimators.hpp"
#include "polyscore/expfam.hpp"
#include "polyscore/fisher.hpp"
#include "polyscore/hardness.hpp"
#include "polyscore/json_io.hpp"
#include "polyscore/rng.hpp"
#include "polyscore/sampler.hpp"

using namespace polyscore;

namespace {

// Exit-code contract.
constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitConvergence = 4;

using Clock = std::chrono::steady_clock;

struct Options {
  std::size_t n = 0;
  int d = 0;
  double B = 1.0;
  std::string theta_file;
  std::string samples;
  std::string cnf;
  std::string cnf_unsat;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::string mode;
  std::optional<double> radius;
  std::optional<std::size_t> points_per_axis;
  std::vector<double> refine_near;
  std::vector<std::size_t> Ns;
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::string basis_format = "text";
  std::string study_format = "json";
  std::string out;
  std::string suite = "all";
  std::string estimator;
  std::string corrupt;
  std::size_t N = 0;
  std::string method = "auto";
  std::size_t chains = 1;
  std::size_t burn_in = McmcConfig{}.burn_in;
  std::size_t max_iter = MleOptions{}.max_iter;
};

GridRequest grid_request(const Options& o) {
  GridRequest r;
  r.radius = o.radius;
  r.points_per_axis = o.points_per_axis;
  r.refine_near = o.refine_near;
  return r;
}

bool grid_flags_given(const Options& o) { return o.radius || o.points_per_axis || !o.refine_near.empty(); }

Json grid_config(const Options& o) {
  return Json{{"radius", o.radius ? Json(*o.radius) : Json("auto")},
              {"points_per_axis", o.points_per_axis ? Json(*o.points_per_axis) : Json("auto")},
              {"refine_near", o.refine_near}};
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(o.out, text);
  }
}

// Report envelope: deterministic body plus a separate timing field.
std::string envelope(const std::string& command, Json config, Json result, Clock::time_point t0) {
  config["defaults"] = defaults_json();
  Json j{{"command", command}, {"config", std::move(config)}, {"result", std::move(result)}};
  j["timing"] = Json{{"wall_time_s", std::chrono::duration<double>(Clock::now() - t0).count()}};
  return j.dump(2) + "\n";
}

HardnessParams hardness_params(const Options& o, std::size_t n, std::size_t m, const std::string& fallback_mode) {
  if (o.alpha || o.beta) {
    if (!o.alpha || !o.beta) throw std::invalid_argument("--alpha and --beta must be given together");
    if (!o.mode.empty()) throw std::invalid_argument("give either --alpha/--beta or --mode, not both");
    return {*o.alpha, *o.beta, ParamMode{ParamKind::Scaled, 1.0}};
  }
  return default_params(n, m, parse_param_mode(o.mode.empty() ? fallback_mode : o.mode));
}

Json params_json(const HardnessParams& p, bool explicit_values) {
  return Json{{"alpha", p.alpha}, {"beta", p.beta}, {"mode", explicit_values ? "explicit" : to_string(p.mode)}};
}

// --- basis -----------------------------------------------------------------------

int cmd_basis(const Options& o) {
  const MonomialBasis basis = enumerate_basis(o.n, o.d);
  if (o.basis_format == "json") {
    Json idx = Json::array();
    for (const auto& m : basis.indices()) idx.push_back(m.degrees());
    emit(o, Json{{"n", o.n}, {"d", o.d}, {"indices", idx}, {"M", basis.M()}}.dump() + "\n");
  } else {
    std::string text;
    for (const auto& m : basis.indices()) text += m.key() + "\n";
    text += "M=" + std::to_string(basis.M()) + "\n";
    emit(o, text);
  }
  return kExitOk;
}

// --- sample ----------------------------------------------------------------------

int cmd_sample(const Options& o) {
  const auto t0 = Clock::now();
  if (o.out.empty()) throw std::invalid_argument("sample needs --out for the sample file");
  const ParamVector p = read_theta_file(o.theta_file);
  std::string method = o.method;
  if (method == "auto") method = is_separable(p) ? "exact" : "mala";
  McmcConfig cfg;
  cfg.chains = o.chains;
  cfg.burn_in = o.burn_in;
  SampleSet s;
  if (method == "exact") {
    s = sample_exact_separable(p, o.N, o.seed);
  } else if (method == "mala") {
    s = sample_mala(p, o.N, cfg, o.seed);
  } else {
    throw std::invalid_argument("--method must be auto, exact or mala");
  }
  write_samples(o.out, s);
  Json config{{"theta", theta_to_json(p)}, {"N", o.N}, {"seed", o.seed}, {"method", method}, {"out", o.out}};
  const std::string report = envelope("sample", config, to_json(s.provenance), t0);
  std::cout << report;
  return kExitOk;
}

// --- fit -------------------------------------------------------------------------

int cmd_fit(const Options& o) {
  const auto t0 = Clock::now();
  const Estimator est = parse_estimator(o.estimator);
  const SampleSet s = read_samples(o.samples);
  if (o.n != 0 && o.n != s.n) throw std::invalid_argument("--n does not match the sample file");
  auto basis = make_basis(s.n, o.d);
  FitReport r;
  Json config{{"estimator", to_string(est)}, {"samples", o.samples}, {"n", s.n}, {"d", o.d}, {"N", s.N}};
  if (est == Estimator::SM) {
    r = fit_score_matching(s, basis);
  } else {
    const ResolvedGrid g = resolve_grid(ParamVector::zero(basis), grid_request(o));
    MleOptions mo;
    mo.regrid = !grid_flags_given(o);
    mo.max_iter = o.max_iter;
    config["grid"] = grid_config(o);
    config["regrid"] = mo.regrid;
    config["max_iter"] = mo.max_iter;
    r = fit_mle(s, basis, g.grid, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis->size())), mo);
  }
  emit(o, envelope("fit", config, to_json(r, *basis), t0));
  return kExitOk;
}

// --- encode ----------------------------------------------------------------------

int cmd_encode(const Options& o) {
  const auto t0 = Clock::now();
  const CnfFormula f = read_dimacs(o.cnf);
  if (!o.alpha && !o.beta && o.mode.empty()) throw std::invalid_argument("encode needs --alpha/--beta or --mode");
  const HardnessParams hp = hardness_params(o, f.n, f.m(), "zeroth");
  const EncodedInstance inst = encode(f, hp.alpha, hp.beta);
  Json result = theta_to_json(inst.theta);
  result["alpha"] = inst.alpha;
  result["beta"] = inst.beta;
  result["B"] = inst.B;
  result["m"] = f.m();
  result["dropped_constant"] = inst.dropped_constant;
  Json config{{"cnf", o.cnf}, {"params", params_json(hp, o.alpha.has_value())}};
  emit(o, envelope("encode", config, result, t0));
  return kExitOk;
}

// --- verify ----------------------------------------------------------------------

Json suite_polybasis(const Options& o, bool& ok) {
  const std::size_t n = o.n ? o.n : 2;
  const int d = o.d ? o.d : 3;
  RandomStream rng(o.seed, 11);
  std::vector<MultiIndex> all{MultiIndex::zero(n)};
  for (int t = 1; t <= d; ++t) {
    for (auto& m : indices_of_degree(n, t)) all.push_back(m);
  }
  double worst_ratio = 0.0, worst_roundtrip = 0.0;
  bool holds = true;
  for (int trial = 0; trial < 1000; ++trial) {
    PolyCoeffs f(n);
    for (const auto& m : all) f.add_term(m, rng.normal());
    const Check c = check_mon_l2_bound(f, n, d);
    holds = holds && c.holds;
    worst_ratio = std::max(worst_ratio, c.lhs / c.rhs);
    const PolyCoeffs back = from_legendre(n, to_legendre(f, d), d);
    for (const auto& m : all) worst_roundtrip = std::max(worst_roundtrip, std::abs(back.coeff(m) - f.coeff(m)));
  }
  const std::vector<Check> checks{{"mon_l2_bound_worst_ratio", worst_ratio, 1.0, holds},
                                  {"legendre_roundtrip", worst_roundtrip, 1e-9, worst_roundtrip <= 1e-9}};
  ok = ok && all_hold(checks);
  return Json{{"n", n}, {"d", d}, {"trials", 1000}, {"checks", to_json(checks)}};
}

Json suite_bounds(const Options& o, bool& ok) {
  std::optional<ParamVector> p;
  if (!o.theta_file.empty()) {
    p = read_theta_file(o.theta_file);
  } else {
    const std::size_t n = o.n ? o.n : 1;
    const int d = o.d ? o.d : 3;
    auto basis = make_basis(n, d);
    RandomStream rng(o.seed, 12);
    Eigen::VectorXd t(static_cast<Eigen::Index>(basis->size()));
    for (auto& v : t) v = o.B * (2.0 * rng.uniform() - 1.0);
    p = ParamVector(basis, t, o.B);
  }
  const ResolvedGrid g = resolve_grid(*p, grid_request(o));
  VerifyBoundsOptions vo;
  vo.seed = o.seed;
  if (!o.corrupt.empty()) {
    if (o.corrupt != "fisher") throw std::invalid_argument("--corrupt accepts only 'fisher'");
    vo.corrupt_fisher = true;
  }
  const SpectralReport r = verify_bounds(*p, g.grid, vo);
  const std::vector<Check> pre = regularity_preflight(*p, g.grid);
  ok = ok && all_hold(r.checks) && all_hold(pre);
  return Json{{"theta", theta_to_json(*p)}, {"grid_notes", g.notes}, {"spectral", to_json(r)},
              {"regularity", to_json(pre)}};
}

Json suite_integrals(bool& ok) {
  struct Triple {
    double beta, r;
    int m;
  };
  const Triple triples[] = {{2e5, 0.035, 1}, {1e6, 0.02, 4}, {5e6, 0.01, 10}};
  Json conc = Json::array();
  for (const auto& t : triples) {
    const auto checks = verify_int_concentration(t.beta, t.r, t.m);
    ok = ok && all_hold(checks);
    conc.push_back(Json{{"beta", t.beta}, {"r", t.r}, {"m", t.m}, {"checks", to_json(checks)}});
  }
  Json moments = Json::array();
  for (double beta : {400.0, 1e3, 1e4}) {
    const auto checks = verify_1d_moment_bound(beta);
    ok = ok && all_hold(checks);
    moments.push_back(Json{{"beta", beta}, {"checks", to_json(checks)}});
  }
  return Json{{"concentration", conc}, {"moment_bound", moments}};
}

Json suite_hardness(const Options& o, bool& ok) {
  if (o.cnf.empty()) throw std::invalid_argument("the hardness suite needs --cnf");
  const CnfFormula f = read_dimacs(o.cnf);
  const bool explicit_values = o.alpha.has_value();
  Json out;
  const HardnessParams roots_p = hardness_params(o, f.n, f.m(), "zeroth");
  const RootReport roots = verify_roots(encode(f, roots_p.alpha, roots_p.beta), o.seed);
  ok = ok && roots.holds;
  out["roots"] = Json{{"params", params_json(roots_p, explicit_values)}, {"report", to_json(roots)}};
  if (f.n <= kMaxGridDim) {
    const auto sols = satisfying_assignments(f);
    if (sols.size() == 1) {
      const HardnessParams hp = hardness_params(o, f.n, f.m(), "first");
      const MeanSignReport r = mean_sign_experiment(f, hp.alpha, hp.beta, o.points_per_axis);
      ok = ok && r.recovered_matches && r.margin.holds;
      out["mean_sign"] = Json{{"params", params_json(hp, explicit_values)}, {"report", to_json(r)}};
    } else {
      out["mean_sign"] = Json{{"skipped", std::to_string(sols.size()) + " satisfying assignments"}};
    }
    const HardnessParams hp = hardness_params(o, f.n, f.m(), "sampling");
    const OrthantReport orth = orthant_mass(f, hp.alpha, hp.beta, o.points_per_axis);
    if (orth.half_mass) ok = ok && orth.half_mass->holds;
    out["orthant_mass"] = Json{{"params", params_json(hp, explicit_values)}, {"report", to_json(orth)}};
    if (!o.cnf_unsat.empty()) {
      const CnfFormula u = read_dimacs(o.cnf_unsat);
      const HardnessParams zp = hardness_params(o, f.n, f.m(), "zeroth");
      const ZGapReport z = zgap_experiment(f, u, zp.alpha, zp.beta, o.points_per_axis);
      ok = ok && z.separation.holds;
      out["zgap"] = Json{{"params", params_json(zp, explicit_values)}, {"report", to_json(z)}};
    }
  } else {
    out["quadrature"] = Json{{"skipped", "n > " + std::to_string(kMaxGridDim)}};
  }
  return out;
}

int cmd_verify(const Options& o) {
  const auto t0 = Clock::now();
  const std::string& s = o.suite;
  if (s != "polybasis" && s != "bounds" && s != "hardness" && s != "integrals" && s != "all") {
    throw std::invalid_argument("--suite must be polybasis, bounds, hardness, integrals or all");
  }
  bool ok = true;
  Json result;
  if (s == "polybasis" || s == "all") result["polybasis"] = suite_polybasis(o, ok);
  if (s == "bounds" || s == "all") result["bounds"] = suite_bounds(o, ok);
  if (s == "integrals" || s == "all") result["integrals"] = suite_integrals(ok);
  if (s == "hardness" || (s == "all" && !o.cnf.empty())) result["hardness"] = suite_hardness(o, ok);
  result["all_hold"] = ok;
  Json config{{"suite", s},          {"n", o.n},       {"d", o.d},           {"B", o.B},
              {"seed", o.seed},      {"cnf", o.cnf},   {"cnf_unsat", o.cnf_unsat},
              {"theta_file", o.theta_file}, {"corrupt", o.corrupt}, {"grid", grid_config(o)}};
  emit(o, envelope("verify", config, result, t0));
  return ok ? kExitOk : kExitNumerical;
}

// --- study -----------------------------------------------------------------------

int cmd_study(const Options& o) {
  const auto t0 = Clock::now();
  const ParamVector star = read_theta_file(o.theta_file);
  std::vector<Estimator> ests;
  const std::string e = o.estimator.empty() ? "both" : o.estimator;
  if (e == "both") {
    ests = {Estimator::SM, Estimator::MLE};
  } else {
    ests = {parse_estimator(e)};
  }
  const StudyResult r = convergence_study(star, o.Ns, o.trials, ests, o.seed);
  const std::string csv = study_csv(r);
  Json config{{"theta_star", theta_to_json(star)}, {"estimator", e}, {"Ns", o.Ns}, {"trials", o.trials},
              {"seed", o.seed}};
  if (o.study_format == "csv") {
    emit(o, csv);
    return kExitOk;
  }
  if (!o.out.empty()) {
    write_text_file(o.out, csv);
    config["csv"] = o.out;
  }
  std::cout << envelope("study", config, to_json(r), t0);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polyscore: score matching and maximum likelihood for polynomial exponential families"};
  app.require_subcommand(1);
  Options o;

  auto add_family = [&](CLI::App* c) {
    c->add_option("--n", o.n, "dimension");
    c->add_option("--d", o.d, "odd degree of the sufficient statistics");
    c->add_option("--B", o.B, "box bound on ||theta||_inf");
  };
  auto add_grid = [&](CLI::App* c) {
    c->add_option("--radius", o.radius, "quadrature radius");
    c->add_option("--points-per-axis", o.points_per_axis, "quadrature nodes per axis (disables automatic doubling)");
    c->add_option("--refine-near", o.refine_near, "abscissae to refine around")->delimiter(',');
  };
  auto add_hardness = [&](CLI::App* c) {
    c->add_option("--alpha", o.alpha, "clause weight");
    c->add_option("--beta", o.beta, "hypercube weight");
    c->add_option("--mode", o.mode, "zeroth | first | sampling | scaled(f)");
  };
  auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "output path (default stdout)"); };

  auto* basis = app.add_subcommand("basis", "list the sufficient statistics");
  basis->add_option("--n", o.n, "dimension")->required();
  basis->add_option("--d", o.d, "odd degree")->required();
  basis->add_option("--format", o.basis_format, "text | json")->check(CLI::IsMember({"text", "json"}));
  add_out(basis);

  auto* sample = app.add_subcommand("sample", "draw samples from p_theta");
  sample->add_option("--theta-file", o.theta_file, "theta JSON")->required()->check(CLI::ExistingFile);
  sample->add_option("--N", o.N, "number of samples")->required();
  sample->add_option("--seed", o.seed, "random seed");
  sample->add_option("--method", o.method, "auto | exact | mala");
  sample->add_option("--chains", o.chains, "MALA chains");
  sample->add_option("--burn-in", o.burn_in, "MALA burn-in steps");
  add_out(sample);

  auto* fit = app.add_subcommand("fit", "fit theta from a sample file");
  fit->add_option("--estimator", o.estimator, "sm | mle")->required();
  fit->add_option("--samples", o.samples, "sample file")->required();
  add_family(fit);
  fit->get_option("--d")->required();
  fit->add_option("--max-iter", o.max_iter, "MLE iteration cap");
  add_grid(fit);
  add_out(fit);

  auto* enc = app.add_subcommand("encode", "encode a 3-CNF formula as a family member");
  enc->add_option("--cnf", o.cnf, "DIMACS file")->required();
  add_hardness(enc);
  add_out(enc);

  auto* verify = app.add_subcommand("verify", "run verification suites; exit 0 iff every check holds");
  verify->add_option("--suite", o.suite, "polybasis | bounds | hardness | integrals | all");
  add_family(verify);
  verify->add_option("--theta-file", o.theta_file, "theta JSON for the bounds suite");
  verify->add_option("--seed", o.seed, "random seed");
  verify->add_option("--cnf", o.cnf, "DIMACS file for the hardness suite");
  verify->add_option("--cnf-unsat", o.cnf_unsat, "unsatisfiable partner formula for the partition-gap experiment");
  verify->add_option("--corrupt", o.corrupt, "fault injection: fisher");
  add_hardness(verify);
  add_grid(verify);
  add_out(verify);

  auto* study = app.add_subcommand("study", "error-versus-N study over repeated trials");
  study->add_option("--estimator", o.estimator, "sm | mle | both");
  study->add_option("--theta-star,--theta-file", o.theta_file, "true theta JSON")->required();
  study->add_option("--Ns", o.Ns, "comma-separated sample sizes")->delimiter(',')->required();
  study->add_option("--trials", o.trials, "trials per N");
  study->add_option("--seed", o.seed, "random seed");
  study->add_option("--format", o.study_format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  add_out(study);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (basis->parsed()) return cmd_basis(o);
    if (sample->parsed()) return cmd_sample(o);
    if (fit->parsed()) return cmd_fit(o);
    if (enc->parsed()) return cmd_encode(o);
    if (verify->parsed()) return cmd_verify(o);
    if (study->parsed()) return cmd_study(o);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
