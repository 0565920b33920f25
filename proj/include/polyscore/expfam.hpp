#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyscore/check.hpp"
#include "polyscore/polybasis.hpp"
#include "polyscore/quadrature.hpp"

namespace polyscore {

/// theta in Theta_B = {||theta||_inf <= B}, B >= 1, together with its basis.
class ParamVector {
 public:
  ParamVector(BasisPtr basis, Eigen::VectorXd theta, double B);

  /// Member of the family with B = max(1, ||theta||_inf). Used for iterates
  /// and estimates that carry no a-priori box.
  static ParamVector unconstrained(BasisPtr basis, Eigen::VectorXd theta);
  static ParamVector zero(BasisPtr basis, double B = 1.0);

  const MonomialBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  std::size_t n() const { return basis_->n(); }
  int d() const { return basis_->d(); }
  const Eigen::VectorXd& theta() const { return theta_; }
  double B() const { return B_; }

  /// Indices j with theta_j != 0.
  const std::vector<std::size_t>& active() const { return active_; }

 private:
  BasisPtr basis_;
  Eigen::VectorXd theta_;
  double B_;
  std::vector<std::size_t> active_;
};

/// log h(x) = -sum_i x_i^{d+1}.
double log_base_measure(int d, std::span<const double> x);
/// log h(x) + <theta, T(x)>.
double log_unnormalized_density(const ParamVector& p, std::span<const double> x);
/// grad log h + JT^T theta.
Eigen::VectorXd score(const ParamVector& p, std::span<const double> x);
/// Both of the above in one pass; grad must have length n.
double log_density_and_score(const ParamVector& p, std::span<const double> x, std::span<double> grad);

// --- quadrature oracle --------------------------------------------------------

/// Raw moments E_p[x^e] for every multi-index with |e| <= max_total, and log Z.
class MomentTable {
 public:
  MomentTable(std::size_t n, int max_total, double log_z, std::vector<double> values);

  std::size_t n() const { return n_; }
  int max_total() const { return max_total_; }
  double log_z() const { return log_z_; }
  double operator()(const MultiIndex& e) const;
  double at(std::span<const int> e) const;

 private:
  std::size_t n_;
  int max_total_;
  double log_z_;
  std::vector<double> values_;  // dense over (max_total + 1)^n
};

MomentTable moment_table(const ParamVector& p, const QuadratureGrid& grid, int max_total);

struct Expectation {
  double log_z = 0.0;
  Eigen::VectorXd value;
};

/// out[0..k) = g(x); must be safe to call concurrently.
using NodeFunction = std::function<void(std::span<const double> x, std::span<double> out)>;

/// E_p[g(x)] for a vector-valued g, computed over every grid node.
Expectation nodewise_expectation(const ParamVector& p, const QuadratureGrid& grid, std::size_t k,
                                 const NodeFunction& g);

double log_partition(const ParamVector& p, const QuadratureGrid& grid);

struct Moments {
  Eigen::VectorXd mean_T;
  Eigen::MatrixXd second_T;
};
Moments moments(const ParamVector& p, const QuadratureGrid& grid);

Eigen::VectorXd mean_T_from(const MomentTable& table, const MonomialBasis& basis);
Eigen::MatrixXd second_T_from(const MomentTable& table, const MonomialBasis& basis);

// --- grid selection and the convergence gate ------------------------------------

inline constexpr double kGridGateTol = 1e-8;
inline constexpr double kTailMassTol = 1e-12;
inline constexpr std::size_t kDefaultPointsPerAxis = 200;
/// Node budget per grid for automatic resolution increases.
inline constexpr std::size_t kMaxGridNodes = 128'000'000;

struct GateReport {
  double value = 0.0;
  double value_doubled = 0.0;
  bool converged = false;
};

/// log Z on grid and on doubled(grid); converged iff they agree within tol.
GateReport grid_gate(const ParamVector& p, const QuadratureGrid& grid, double tol = kGridGateTol);

struct GridRequest {
  std::optional<double> radius;
  std::optional<std::size_t> points_per_axis;
  std::vector<double> refine_near;
  std::optional<double> refine_width;
};

struct ResolvedGrid {
  QuadratureGrid grid;
  GateReport gate;
  std::optional<double> tail_mass;  // measured only when the radius is chosen automatically
  std::vector<std::string> notes;
};

/// Smallest r >= 1 beyond which the log integrand is provably 60 below its
/// value at the origin, from |theta_j x^{d_j}| <= |theta_j| r^{|d_j|}.
double envelope_radius(const ParamVector& p);

/// Builds a grid for p: an unspecified radius is the smallest panel edge with
/// tail mass below kTailMassTol, searched inside min(tail_radius, envelope);
/// an unspecified resolution starts at kDefaultPointsPerAxis and doubles while
/// the gate fails. Throws GridNotConverged when the gate cannot be met.
ResolvedGrid resolve_grid(const ParamVector& p, const GridRequest& request = {});

// --- appendix bounds -------------------------------------------------------------

/// 2^{d+3} n B M.
double tail_radius(std::size_t n, int d, double B);
/// max(2 l^l, B^l M^l 2^{l(d+1)+1}).
double moment_bound(int l, std::size_t n, int d, double B);

/// For f(x) = x^8 + beta (1 - x^2)^2: the explicit concentration factor and
/// its (1 + 1/m) corollary, integrals by adaptive Gauss–Kronrod.
std::vector<Check> verify_int_concentration(double beta, double r, int m);
/// int x^k e^{-f} <= 2^k int e^{-f} on [0, inf) for k = 1..8; beta >= 160 log 8.
std::vector<Check> verify_1d_moment_bound(double beta);

}  // namespace polyscore
