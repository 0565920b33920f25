#include "polyscore/hardness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "polyscore/errors.hpp"
#include "polyscore/parallel.hpp"
#include "polyscore/rng.hpp"

namespace polyscore {

namespace {

void validate_clause(const std::vector<long long>& lits, long long n, std::size_t index) {
  const std::string where = "clause " + std::to_string(index + 1);
  if (lits.size() != 3) {
    throw ParseError(where + " has " + std::to_string(lits.size()) + " literals; exactly 3 are required");
  }
  for (long long l : lits) {
    if (l == 0 || std::llabs(l) > n) {
      throw ParseError(where + ": literal " + std::to_string(l) + " is outside 1.." + std::to_string(n));
    }
  }
  if (std::llabs(lits[0]) == std::llabs(lits[1]) || std::llabs(lits[0]) == std::llabs(lits[2]) ||
      std::llabs(lits[1]) == std::llabs(lits[2])) {
    throw ParseError(where + " repeats a variable");
  }
}

void require_valid(const CnfFormula& f) {
  if (f.n == 0) throw std::invalid_argument("formula has no variables");
  for (std::size_t c = 0; c < f.m(); ++c) {
    std::vector<long long> lits(f.clauses[c].begin(), f.clauses[c].end());
    try {
      validate_clause(lits, static_cast<long long>(f.n), c);
    } catch (const ParseError& e) {
      throw std::invalid_argument(e.what());
    }
  }
}

// Value of an integer-coefficient polynomial on the vertex whose negative
// coordinates form `neg`, exactly.
struct VertexPoly {
  std::vector<std::uint32_t> odd_mask;
  std::vector<long long> coeff;

  explicit VertexPoly(const PolyCoeffs& f) {
    for (const auto& [m, c] : f.terms()) {
      const double r = std::round(c);
      if (r != c || std::abs(r) > 1e15) throw std::logic_error("vertex polynomial needs integer coefficients");
      std::uint32_t mask = 0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] % 2 == 1) mask |= 1u << i;
      }
      odd_mask.push_back(mask);
      coeff.push_back(static_cast<long long>(r));
    }
  }

  long long at(std::uint32_t neg) const {
    long long s = 0;
    for (std::size_t t = 0; t < coeff.size(); ++t) {
      s += (std::popcount(odd_mask[t] & neg) % 2) ? -coeff[t] : coeff[t];
    }
    return s;
  }
};

std::uint32_t neg_mask(const std::vector<int>& v) {
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0) mask |= 1u << i;
  }
  return mask;
}

// Vertex with coordinate 1 as the most significant bit, bit set meaning +1.
std::vector<int> vertex_of(std::size_t code, std::size_t n) {
  std::vector<int> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = ((code >> (n - 1 - i)) & 1u) ? 1 : -1;
  return v;
}

void require_small(const CnfFormula& f, const char* what) {
  if (f.n > kMaxGridDim) {
    throw std::invalid_argument(std::string(what) + " needs n <= " + std::to_string(kMaxGridDim) +
                                " for quadrature; got n=" + std::to_string(f.n));
  }
}

ResolvedGrid grid_for(const EncodedInstance& inst, std::optional<std::size_t> ppa) {
  return resolve_grid(inst.theta, hardness_grid_request(inst, ppa));
}

}  // namespace

// --- DIMACS -----------------------------------------------------------------------

CnfFormula parse_dimacs(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  CnfFormula f;
  bool have_header = false;
  long long declared_m = 0;
  std::vector<long long> current;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok[0] == 'c') continue;
    if (tok == "%") break;
    if (tok == "p") {
      std::string fmt;
      long long n = -1;
      if (have_header || !(ls >> fmt >> n >> declared_m) || fmt != "cnf" || n < 1 || declared_m < 0) {
        throw ParseError("line " + std::to_string(line_no) + ": bad problem line '" + line + "'");
      }
      std::string extra;
      if (ls >> extra) throw ParseError("line " + std::to_string(line_no) + ": trailing text after problem line");
      f.n = static_cast<std::size_t>(n);
      have_header = true;
      continue;
    }
    if (!have_header) throw ParseError("line " + std::to_string(line_no) + ": clause before the 'p cnf' header");
    ls.clear();
    ls.str(line);
    while (ls >> tok) {
      long long lit = 0;
      std::size_t used = 0;
      try {
        lit = std::stoll(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw ParseError("line " + std::to_string(line_no) + ": '" + tok + "' is not an integer");
      if (lit == 0) {
        validate_clause(current, static_cast<long long>(f.n), f.clauses.size());
        f.clauses.push_back({static_cast<int>(current[0]), static_cast<int>(current[1]), static_cast<int>(current[2])});
        current.clear();
      } else {
        current.push_back(lit);
      }
    }
  }
  if (!have_header) throw ParseError("missing 'p cnf n m' header");
  if (!current.empty()) throw ParseError("last clause is not terminated by 0");
  if (static_cast<long long>(f.m()) != declared_m) {
    throw ParseError("header declares " + std::to_string(declared_m) + " clauses but " + std::to_string(f.m()) +
                     " were read");
  }
  return f;
}

CnfFormula read_dimacs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CNF file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return parse_dimacs(buf.str());
}

std::string to_dimacs(const CnfFormula& f) {
  std::ostringstream out;
  out << "p cnf " << f.n << ' ' << f.m() << '\n';
  for (const auto& c : f.clauses) out << c[0] << ' ' << c[1] << ' ' << c[2] << " 0\n";
  return out.str();
}

CnfFormula random_cnf(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("random_cnf: need at least 3 variables");
  RandomStream rng(seed, 0);
  CnfFormula f;
  f.n = n;
  for (std::size_t c = 0; c < m; ++c) {
    Clause cl{};
    for (std::size_t k = 0; k < 3; ++k) {
      int var = 0;
      do {
        var = 1 + static_cast<int>(rng.next_u64() % n);
      } while (std::find_if(cl.begin(), cl.begin() + static_cast<long>(k), [&](int l) { return std::abs(l) == var; }) !=
               cl.begin() + static_cast<long>(k));
      cl[k] = (rng.next_u64() & 1u) ? var : -var;
    }
    f.clauses.push_back(cl);
  }
  return f;
}

bool satisfies(const CnfFormula& f, const std::vector<int>& v) {
  if (v.size() != f.n) throw std::invalid_argument("assignment length does not match the formula");
  for (const auto& c : f.clauses) {
    bool ok = false;
    for (int l : c) {
      const int val = v[static_cast<std::size_t>(std::abs(l) - 1)];
      if ((l > 0 && val > 0) || (l < 0 && val < 0)) {
        ok = true;
        break;
      }
    }
    if (!ok) return false;
  }
  return true;
}

std::vector<std::vector<int>> satisfying_assignments(const CnfFormula& f) {
  if (f.n > 20) throw std::invalid_argument("exhaustive scan limited to n <= 20");
  std::vector<std::vector<int>> out;
  for (std::size_t code = 0; code < (std::size_t{1} << f.n); ++code) {
    auto v = vertex_of(code, f.n);
    if (satisfies(f, v)) out.push_back(std::move(v));
  }
  return out;
}

// --- polynomials ---------------------------------------------------------------------

PolyCoeffs clause_poly(const Clause& clause, std::size_t n) {
  PolyCoeffs out = PolyCoeffs::constant(n, 1.0);
  for (int l : clause) {
    const std::size_t i = static_cast<std::size_t>(std::abs(l) - 1);
    if (l == 0 || i >= n) throw std::invalid_argument("clause literal out of range");
    // (x_i - s)^2 = x_i^2 - 2 s x_i + 1, with s = +1 for a positive literal.
    const double s = l > 0 ? 1.0 : -1.0;
    PolyCoeffs factor = PolyCoeffs::constant(n, 1.0);
    factor.add_term(MultiIndex::unit(n, i, 2), 1.0);
    factor.add_term(MultiIndex::unit(n, i, 1), -2.0 * s);
    out = out * factor;
  }
  return out;
}

PolyCoeffs hypercube_poly(std::size_t n) {
  if (n == 0) throw std::invalid_argument("hypercube_poly: n must be >= 1");
  PolyCoeffs g = PolyCoeffs::constant(n, static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    g.add_term(MultiIndex::unit(n, i, 2), -2.0);
    g.add_term(MultiIndex::unit(n, i, 4), 1.0);
  }
  return g;
}

PolyCoeffs penalty_poly(const CnfFormula& f, double alpha, double beta) {
  PolyCoeffs H(f.n);
  for (const auto& c : f.clauses) H += clause_poly(c, f.n);
  return H * alpha + hypercube_poly(f.n) * beta;
}

EncodedInstance encode(const CnfFormula& f, double alpha, double beta) {
  require_valid(f);
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw std::invalid_argument("encode: alpha and beta must be finite and nonnegative");
  }
  const PolyCoeffs F = penalty_poly(f, alpha, beta);
  auto basis = make_basis(f.n, kHardnessDegree);
  const double B = 64.0 * static_cast<double>(f.m()) * alpha + 2.0 * beta;
  Eigen::VectorXd theta = -poly_to_theta(*basis, F);
  return EncodedInstance{ParamVector(basis, std::move(theta), std::max(1.0, B)), alpha, beta, B,
                         F.coeff(MultiIndex::zero(f.n)), f};
}

// --- parameter prescriptions --------------------------------------------------------

ParamMode parse_param_mode(const std::string& s) {
  if (s == "zeroth") return {ParamKind::Zeroth, 1.0};
  if (s == "first") return {ParamKind::First, 1.0};
  if (s == "sampling") return {ParamKind::Sampling, 1.0};
  std::string arg;
  if (s.rfind("scaled(", 0) == 0 && s.size() > 8 && s.back() == ')') {
    arg = s.substr(7, s.size() - 8);
  } else if (s.rfind("scaled:", 0) == 0) {
    arg = s.substr(7);
  } else {
    throw std::invalid_argument("unknown parameter mode '" + s + "' (zeroth, first, sampling, scaled(f))");
  }
  double factor = 0.0;
  std::size_t used = 0;
  try {
    factor = std::stod(arg, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != arg.size() || !(factor > 0.0) || factor > 1.0) {
    throw std::invalid_argument("scaled mode needs a factor in (0, 1]; got '" + arg + "'");
  }
  return {ParamKind::Scaled, factor};
}

std::string to_string(const ParamMode& mode) {
  switch (mode.kind) {
    case ParamKind::Zeroth:
      return "zeroth";
    case ParamKind::First:
      return "first";
    case ParamKind::Sampling:
      return "sampling";
    case ParamKind::Scaled: {
      std::ostringstream out;
      out.precision(17);
      out << "scaled(" << mode.factor << ")";
      return out.str();
    }
  }
  return "unknown";
}

HardnessParams default_params(std::size_t n, std::size_t m, const ParamMode& mode) {
  if (n == 0) throw std::invalid_argument("default_params: n must be >= 1");
  if (m > 10 * n) {
    throw std::invalid_argument("prescribed parameters assume at most 10n clauses; got m=" + std::to_string(m) +
                                " for n=" + std::to_string(n));
  }
  const double N = static_cast<double>(n);
  HardnessParams p;
  p.mode = mode;
  switch (mode.kind) {
    case ParamKind::First:
      p.alpha = 4.0 * N;
      p.beta = 129600.0 * N * N * std::log(102.0 * N * N * std::sqrt(5.0));
      break;
    case ParamKind::Sampling:
      p.alpha = 2.0 * (N + 1.0);
      p.beta = 32400.0 * N * std::log(13.0 * N * std::sqrt(5.0 * N));
      break;
    case ParamKind::Zeroth:
    case ParamKind::Scaled:
      p.alpha = 2.0 * (N + 1.0);
      p.beta = 64800.0 * N * std::log(13.0 * N * std::sqrt(10.0 * N));
      break;
  }
  if (mode.kind == ParamKind::Scaled) {
    p.alpha *= mode.factor;
    p.beta *= mode.factor;
  }
  return p;
}

GridRequest hardness_grid_request(const EncodedInstance& inst, std::optional<std::size_t> ppa) {
  const double n = static_cast<double>(inst.formula.n);
  const double budget = 64.0 * static_cast<double>(inst.formula.m()) * inst.alpha + 60.0 + n +
                        0.5 * n * std::log(8.0 * inst.beta + 1.0);
  GridRequest req;
  req.radius = std::max(2.0, std::pow(budget, 1.0 / 8.0));
  req.points_per_axis = ppa.value_or(kHardnessPointsPerAxis);
  req.refine_near = {-1.0, 1.0};
  req.refine_width = refine_width_for_beta(inst.beta);
  return req;
}

// --- roots ---------------------------------------------------------------------------

RootReport verify_roots(const EncodedInstance& inst, std::uint64_t seed, std::size_t random_points) {
  const CnfFormula& f = inst.formula;
  if (f.n > 20) throw std::invalid_argument("verify_roots: exhaustive scan limited to n <= 20");
  PolyCoeffs Hsum(f.n);
  for (const auto& c : f.clauses) Hsum += clause_poly(c, f.n);
  const VertexPoly H(Hsum), G(hypercube_poly(f.n));
  const bool alpha_on = inst.alpha != 0.0, beta_on = inst.beta != 0.0;

  RootReport r;
  r.vertices = std::size_t{1} << f.n;
  const std::size_t chunks = std::min<std::size_t>(64, r.vertices);
  std::vector<std::size_t> sat(chunks, 0), bad(chunks, 0);
  parallel_chunks(chunks, [&](std::size_t c) {
    for (std::size_t code = c; code < r.vertices; code += chunks) {
      const auto v = vertex_of(code, f.n);
      const std::uint32_t neg = neg_mask(v);
      const long long h = H.at(neg), g = G.at(neg);
      const bool root = (!alpha_on || h == 0) && (!beta_on || g == 0);
      const bool s = satisfies(f, v);
      sat[c] += s;
      bad[c] += root != s;
    }
  });
  for (std::size_t c = 0; c < chunks; ++c) {
    r.satisfying += sat[c];
    r.mismatches += bad[c];
  }

  const PolyCoeffs F = penalty_poly(f, inst.alpha, inst.beta);
  RandomStream rng(seed, 1);
  std::vector<double> x(f.n);
  r.random_points = random_points;
  r.min_random_F = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < random_points; ++k) {
    for (auto& v : x) v = -2.0 + 4.0 * rng.uniform();
    r.min_random_F = std::min(r.min_random_F, F.evaluate(x));
  }
  r.holds = r.mismatches == 0 && (random_points == 0 || r.min_random_F > 0.0);
  return r;
}

// --- quadrature experiments --------------------------------------------------------------

LogPartitionReport encoded_log_partition(const EncodedInstance& inst, const GridRequest& request) {
  require_small(inst.formula, "encoded_log_partition");
  const ResolvedGrid g = resolve_grid(inst.theta, request);
  return {g.gate.value - inst.dropped_constant, g.gate};
}

ZGapReport zgap_experiment(const CnfFormula& sat, const CnfFormula& unsat, double alpha, double beta,
                           std::optional<std::size_t> ppa) {
  require_small(sat, "zgap_experiment");
  if (sat.n != unsat.n || sat.m() != unsat.m()) {
    throw std::invalid_argument("zgap_experiment: formulas must share n and m");
  }
  const EncodedInstance a = encode(sat, alpha, beta);
  const EncodedInstance b = encode(unsat, alpha, beta);
  ZGapReport r;
  r.log_z_sat = encoded_log_partition(a, hardness_grid_request(a, ppa)).log_z;
  r.log_z_unsat = encoded_log_partition(b, hardness_grid_request(b, ppa)).log_z;
  r.gap = r.log_z_sat - r.log_z_unsat;
  r.threshold = 2.0 * static_cast<double>(sat.n) * std::log(1.16);
  r.sat_is_satisfiable = !satisfying_assignments(sat).empty();
  r.unsat_is_satisfiable = !satisfying_assignments(unsat).empty();
  r.separation = {"zgap_separation", r.gap, r.threshold, r.gap > r.threshold};
  return r;
}

MeanSignReport mean_sign_experiment(const CnfFormula& f, double alpha, double beta, std::optional<std::size_t> ppa) {
  require_small(f, "mean_sign_experiment");
  const auto sols = satisfying_assignments(f);
  if (sols.size() != 1) {
    throw std::invalid_argument("mean_sign_experiment needs a unique satisfying assignment; found " +
                                std::to_string(sols.size()));
  }
  const EncodedInstance inst = encode(f, alpha, beta);
  const ResolvedGrid g = grid_for(inst, ppa);
  const MomentTable table = moment_table(inst.theta, g.grid, 1);
  MeanSignReport r;
  r.v_star = sols[0];
  r.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.n; ++i) {
    const double m = table(MultiIndex::unit(f.n, i));
    r.mean.push_back(m);
    r.recovered.push_back(m > 0 ? 1 : (m < 0 ? -1 : 0));
    r.min_margin = std::min(r.min_margin, r.v_star[i] * m);
  }
  r.recovered_matches = r.recovered == r.v_star;
  r.margin = {"mean_sign_margin", r.min_margin, 1.0 / 20.0, r.min_margin >= 1.0 / 20.0};
  return r;
}

OrthantReport orthant_mass(const CnfFormula& f, double alpha, double beta, std::optional<std::size_t> ppa) {
  require_small(f, "orthant_mass");
  const EncodedInstance inst = encode(f, alpha, beta);
  const ResolvedGrid g = grid_for(inst, ppa);
  const std::size_t n = f.n;
  const std::size_t count = std::size_t{1} << n;
  auto masses = [&](const QuadratureGrid& grid) {
    return nodewise_expectation(inst.theta, grid, count, [&](std::span<const double> x, std::span<double> out) {
             std::size_t code = 0;
             for (std::size_t i = 0; i < n; ++i) code = (code << 1) | (x[i] >= 0.0 ? 1u : 0u);
             out[code] = 1.0;
           })
        .value;
  };
  const Eigen::VectorXd coarse = masses(g.grid);
  const Eigen::VectorXd fine = masses(doubled(g.grid));
  OrthantReport r;
  double fine_sat = 0.0;
  for (std::size_t code = 0; code < count; ++code) {
    r.orthant_masses.push_back(coarse[static_cast<Eigen::Index>(code)]);
    if (satisfies(f, vertex_of(code, n))) {
      r.satisfiable = true;
      r.mass_on_sat += coarse[static_cast<Eigen::Index>(code)];
      fine_sat += fine[static_cast<Eigen::Index>(code)];
    }
  }
  r.doubled_difference = std::abs(r.mass_on_sat - fine_sat);
  if (r.satisfiable) r.half_mass = Check{"orthant_mass_half", r.mass_on_sat, 0.5, r.mass_on_sat >= 0.5};
  return r;
}

OffCubeReport off_hypercube_mass(const EncodedInstance& inst, std::optional<std::size_t> ppa) {
  require_small(inst.formula, "off_hypercube_mass");
  const ResolvedGrid g = grid_for(inst, ppa);
  auto mass = [&](const QuadratureGrid& grid) {
    return nodewise_expectation(inst.theta, grid, 1, [](std::span<const double> x, std::span<double> out) {
             bool off = false;
             for (double v : x) off = off || std::abs(v) < 0.5 || std::abs(v) > 1.5;
             out[0] = off ? 1.0 : 0.0;
           })
        .value[0];
  };
  OffCubeReport r;
  r.mass = mass(g.grid);
  r.doubled_difference = std::abs(r.mass - mass(doubled(g.grid)));
  return r;
}

}  // namespace polyscore
