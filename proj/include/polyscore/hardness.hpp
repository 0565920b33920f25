#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "polyscore/check.hpp"
#include "polyscore/expfam.hpp"
#include "polyscore/polybasis.hpp"

namespace polyscore {

using Clause = std::array<int, 3>;

/// 3-CNF over variables 1..n; literal -k is the negation of variable k.
struct CnfFormula {
  std::size_t n = 0;
  std::vector<Clause> clauses;

  std::size_t m() const { return clauses.size(); }
};

/// DIMACS text: "c" comment lines, one "p cnf n m" header, clauses ending in 0.
/// Throws ParseError for malformed text, clauses that are not three distinct
/// variables, and out-of-range indices.
CnfFormula parse_dimacs(const std::string& text);
/// Throws IoError when the file cannot be read.
CnfFormula read_dimacs(const std::string& path);
std::string to_dimacs(const CnfFormula& f);

/// Uniform random 3-CNF: each clause draws three distinct variables and signs.
CnfFormula random_cnf(std::size_t n, std::size_t m, std::uint64_t seed);

/// Assignment v in {-1, +1}^n, with +1 meaning true.
bool satisfies(const CnfFormula& f, const std::vector<int>& v);
/// Every satisfying vertex by exhaustive scan (n <= 20), in binary counting order
/// with coordinate 1 as the most significant bit and -1 before +1.
std::vector<std::vector<int>> satisfying_assignments(const CnfFormula& f);

/// prod over the clause of (x_i - 1)^2 for a positive literal, (x_i + 1)^2 for a negated one.
PolyCoeffs clause_poly(const Clause& clause, std::size_t n);
/// sum_i (1 - x_i^2)^2.
PolyCoeffs hypercube_poly(std::size_t n);
/// alpha sum_C H_C + beta G.
PolyCoeffs penalty_poly(const CnfFormula& f, double alpha, double beta);

inline constexpr int kHardnessDegree = 7;

struct EncodedInstance {
  ParamVector theta;  // d = 7, box max(1, B)
  double alpha = 0.0;
  double beta = 0.0;
  double B = 0.0;  // 64 m alpha + 2 beta
  /// Constant term of alpha H + beta G, dropped from theta into the normalizer.
  double dropped_constant = 0.0;
  CnfFormula formula;
};

/// theta holds the coefficients of -(alpha H + beta G) on every monomial of
/// degree 1..7. Throws std::invalid_argument unless alpha, beta >= 0.
EncodedInstance encode(const CnfFormula& f, double alpha, double beta);

enum class ParamKind { Zeroth, First, Sampling, Scaled };

struct ParamMode {
  ParamKind kind = ParamKind::Zeroth;
  double factor = 1.0;  // scaled only
};

/// "zeroth", "first", "sampling", or "scaled(f)" / "scaled:f" with f in (0, 1].
ParamMode parse_param_mode(const std::string& s);
std::string to_string(const ParamMode& mode);

struct HardnessParams {
  double alpha = 0.0;
  double beta = 0.0;
  ParamMode mode;
};

/// The prescribed (alpha, beta) of the oracle and sampling reductions; scaled
/// multiplies the zeroth-order pair by the factor. Requires m <= 10 n.
HardnessParams default_params(std::size_t n, std::size_t m, const ParamMode& mode);

/// Fixed resolution for encoded instances: the 180 refined nodes around +-1
/// plus coarse panels in the three gaps.
inline constexpr std::size_t kHardnessPointsPerAxis = 240;

/// Grid for an encoded instance: panels of width 1/sqrt(beta) around +-1 and
/// a radius R with R^8 >= 64 m alpha + 60 + n + (n/2) log(8 beta + 1), so the
/// region past R carries no mass relative to the best vertex well.
GridRequest hardness_grid_request(const EncodedInstance& inst, std::optional<std::size_t> points_per_axis = {});

struct RootReport {
  std::size_t vertices = 0;
  std::size_t satisfying = 0;
  std::size_t mismatches = 0;  // vertices where (F(v) == 0) != satisfies(v)
  std::size_t random_points = 0;
  double min_random_F = 0.0;
  bool holds = false;
};

/// F = alpha H + beta G vanishes on a vertex iff it satisfies the formula,
/// evaluated exactly in integer arithmetic from the expanded polynomials; F > 0
/// at random points of [-2, 2]^n.
RootReport verify_roots(const EncodedInstance& inst, std::uint64_t seed = 0, std::size_t random_points = 1000);

/// log Z of the encoded density including the dropped constant.
struct LogPartitionReport {
  double log_z = 0.0;
  GateReport gate;
};
LogPartitionReport encoded_log_partition(const EncodedInstance& inst, const GridRequest& request);

struct ZGapReport {
  double log_z_sat = 0.0;
  double log_z_unsat = 0.0;
  double gap = 0.0;
  double threshold = 0.0;  // 2 n log 1.16
  bool sat_is_satisfiable = false;
  bool unsat_is_satisfiable = false;
  Check separation;
};

/// Requires equal n <= 3 and equal m. Grid requests default to hardness_grid_request.
ZGapReport zgap_experiment(const CnfFormula& sat, const CnfFormula& unsat, double alpha, double beta,
                           std::optional<std::size_t> points_per_axis = {});

struct MeanSignReport {
  std::vector<int> v_star;
  std::vector<double> mean;
  std::vector<int> recovered;
  double min_margin = 0.0;  // min_i v*_i E[x_i]
  Check margin;
  bool recovered_matches = false;
};

/// Throws std::invalid_argument unless the formula has exactly one solution.
MeanSignReport mean_sign_experiment(const CnfFormula& f, double alpha, double beta,
                                    std::optional<std::size_t> points_per_axis = {});

struct OrthantReport {
  std::vector<double> orthant_masses;  // indexed like satisfying_assignments
  double mass_on_sat = 0.0;
  /// |mass_on_sat| difference against the doubled grid.
  double doubled_difference = 0.0;
  bool satisfiable = false;
  /// Present only when the formula is satisfiable.
  std::optional<Check> half_mass;
};

OrthantReport orthant_mass(const CnfFormula& f, double alpha, double beta,
                           std::optional<std::size_t> points_per_axis = {});

struct OffCubeReport {
  double mass = 0.0;
  double doubled_difference = 0.0;
};
/// Pr[min_i |x_i| < 1/2 or max_i |x_i| > 3/2] under the encoded density.
OffCubeReport off_hypercube_mass(const EncodedInstance& inst, std::optional<std::size_t> points_per_axis = {});

}  // namespace polyscore
