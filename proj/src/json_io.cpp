#include "polyscore/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "polyscore/errors.hpp"

namespace polyscore {

Json theta_to_json(const ParamVector& p) {
  Json coeffs = Json::object();
  for (std::size_t j = 0; j < p.basis().size(); ++j) {
    const double v = p.theta()[static_cast<Eigen::Index>(j)];
    if (v != 0.0) coeffs[p.basis()[j].key()] = v;
  }
  return Json{{"n", p.n()}, {"d", p.d()}, {"B", p.B()}, {"coefficients", coeffs}};
}

ParamVector theta_from_json(const Json& j) {
  std::size_t n = 0;
  int d = 0;
  try {
    if (!j.is_object()) throw ParseError("theta JSON must be an object");
    n = j.at("n").get<std::size_t>();
    d = j.at("d").get<int>();
    if (!j.at("coefficients").is_object()) throw ParseError("'coefficients' must be an object");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("theta JSON: ") + e.what());
  }
  auto basis = make_basis(n, d);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis->size()));
  for (const auto& [key, value] : j.at("coefficients").items()) {
    MultiIndex m;
    try {
      m = MultiIndex::from_key(key);
    } catch (const std::exception& e) {
      throw ParseError("theta JSON: bad monomial key '" + key + "': " + e.what());
    }
    if (m.size() != n) throw ParseError("theta JSON: key '" + key + "' does not have " + std::to_string(n) + " entries");
    const auto idx = basis->index_of(m);
    if (!idx) throw ParseError("theta JSON: monomial '" + key + "' is not a statistic of degree 1.." + std::to_string(d));
    if (!value.is_number()) throw ParseError("theta JSON: coefficient of '" + key + "' is not a number");
    theta[static_cast<Eigen::Index>(*idx)] = value.get<double>();
  }
  if (j.contains("B")) {
    if (!j.at("B").is_number()) throw ParseError("theta JSON: 'B' is not a number");
    return ParamVector(basis, theta, j.at("B").get<double>());
  }
  return ParamVector::unconstrained(basis, theta);
}

ParamVector read_theta_file(const std::string& path) {
  const std::string text = read_text_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
  return theta_from_json(j);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("error while writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Json to_json(const Check& c) { return Json{{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"holds", c.holds}}; }

Json to_json(const std::vector<Check>& checks) {
  Json a = Json::array();
  for (const auto& c : checks) a.push_back(to_json(c));
  return a;
}

Json to_json(const McmcConfig& c) {
  Json j{{"step_size", c.step_size},       {"burn_in", c.burn_in},
         {"thinning", c.thinning},         {"target_accept", c.target_accept},
         {"chains", c.chains},             {"adapt_thinning", c.adapt_thinning},
         {"max_thinning", c.max_thinning}, {"pilot_length", c.pilot_length}};
  j["initial"] = c.initial ? Json(*c.initial) : Json(nullptr);
  return j;
}

Json to_json(const Provenance& p) {
  Json j{{"method", p.method}};
  if (p.method == "exact") j["grid_nodes"] = p.grid_nodes;
  if (p.method == "mcmc") {
    j["config"] = to_json(p.config);
    j["step_size"] = p.step_size;
    j["thinning"] = p.thinning;
    j["acceptance_rate"] = p.acceptance_rate;
    j["ess"] = p.ess;
    j["orthant_changes"] = p.orthant_changes;
  }
  j["notes"] = p.notes;
  return j;
}

Json to_json(const FitReport& r, const MonomialBasis& basis) {
  Json coeffs = Json::object();
  for (std::size_t j = 0; j < basis.size(); ++j) coeffs[basis[j].key()] = r.theta_hat[static_cast<Eigen::Index>(j)];
  return Json{{"estimator", to_string(r.estimator)},
              {"n", basis.n()},
              {"d", basis.d()},
              {"N", r.N},
              {"theta_hat", Json{{"n", basis.n()}, {"d", basis.d()}, {"coefficients", coeffs}}},
              {"loss", r.loss},
              {"condition_number", r.gram_condition},
              {"iterations", r.iterations},
              {"grad_norm", r.grad_norm},
              {"notes", r.notes}};
}

Json to_json(const SpectralReport& r) {
  return Json{{"lambda_min", r.lambda_min},   {"lambda_max", r.lambda_max}, {"C_P", r.C_P},
              {"gamma_bound", r.gamma_bound}, {"checks", to_json(r.checks)}, {"notes", r.notes},
              {"all_hold", all_hold(r.checks)}};
}

Json to_json(const RootReport& r) {
  return Json{{"vertices", r.vertices},           {"satisfying", r.satisfying},
              {"mismatches", r.mismatches},       {"random_points", r.random_points},
              {"min_random_F", r.min_random_F},   {"holds", r.holds}};
}

Json to_json(const ZGapReport& r) {
  return Json{{"log_z_sat", r.log_z_sat},
              {"log_z_unsat", r.log_z_unsat},
              {"gap", r.gap},
              {"threshold", r.threshold},
              {"sat_is_satisfiable", r.sat_is_satisfiable},
              {"unsat_is_satisfiable", r.unsat_is_satisfiable},
              {"separation", to_json(r.separation)}};
}

Json to_json(const MeanSignReport& r) {
  return Json{{"v_star", r.v_star},
              {"mean", r.mean},
              {"recovered", r.recovered},
              {"recovered_matches", r.recovered_matches},
              {"min_margin", r.min_margin},
              {"margin", to_json(r.margin)}};
}

Json to_json(const OrthantReport& r) {
  Json j{{"orthant_masses", r.orthant_masses},
         {"mass_on_sat", r.mass_on_sat},
         {"doubled_difference", r.doubled_difference},
         {"satisfiable", r.satisfiable}};
  j["half_mass"] = r.half_mass ? to_json(*r.half_mass) : Json(nullptr);
  return j;
}

Json to_json(const StudyResult& r) {
  Json sums = Json::array();
  for (const auto& s : r.summaries) {
    sums.push_back(Json{{"estimator", to_string(s.estimator)},
                        {"Ns", s.Ns},
                        {"median_error_sq", s.median_error_sq},
                        {"slope", s.slope}});
  }
  return Json{{"summaries", sums}, {"ratio_sm_mle", r.ratio_sm_mle}, {"notes", r.notes}};
}

Json defaults_json() {
  const McmcConfig mcmc;
  const MleOptions mle;
  return Json{{"grid",
               {{"gate_tol", kGridGateTol},
                {"tail_mass_tol", kTailMassTol},
                {"points_per_axis", kDefaultPointsPerAxis},
                {"panel_order", kPanelOrder},
                {"max_grid_nodes", kMaxGridNodes},
                {"hardness_points_per_axis", kHardnessPointsPerAxis}}},
              {"mcmc", to_json(mcmc)},
              {"exact_sampler_nodes", kExactGridNodes},
              {"sm_ridge_scale", kRidgeScale},
              {"mle",
               {{"tol", mle.tol}, {"max_iter", mle.max_iter}, {"armijo", mle.armijo}, {"shrink", mle.shrink}}},
              {"eigen_clip_tol", kEigenClipTol}};
}

}  // namespace polyscore
