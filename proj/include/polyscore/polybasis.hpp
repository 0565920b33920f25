#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "polyscore/check.hpp"

namespace polyscore {

/// Degree function d : [n] -> N identifying the monomial prod_i x_i^d(i).
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> degrees);

  static MultiIndex zero(std::size_t n);
  static MultiIndex unit(std::size_t n, std::size_t i, int power = 1);

  std::size_t size() const { return degrees_.size(); }
  int total() const { return total_; }
  int operator[](std::size_t i) const { return degrees_[i]; }
  const std::vector<int>& degrees() const { return degrees_; }

  MultiIndex operator+(const MultiIndex& other) const;

  /// Comma-joined degrees, e.g. "2,0,1". Used as the JSON key.
  std::string key() const;
  static MultiIndex from_key(std::string_view key);

  /// x^d evaluated at x (x.size() == size()).
  double monomial(std::span<const double> x) const;

  bool operator==(const MultiIndex&) const = default;

 private:
  std::vector<int> degrees_;
  int total_ = 0;
};

/// Graded order: total degree ascending, then the degree array
/// lexicographically descending, so x1 precedes x2 and x1^2 precedes x1*x2.
bool graded_less(const MultiIndex& a, const MultiIndex& b);

struct GradedLess {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const { return graded_less(a, b); }
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& m) const noexcept;
};

/// All multi-indices of total degree t in n variables, in graded order.
std::vector<MultiIndex> indices_of_degree(std::size_t n, int t);

/// C(n, k) as a double (exact for the ranges used here).
double binomial(int n, int k);

/// Ordered sufficient statistics T(x): every monomial with 1 <= |d| <= d.
class MonomialBasis {
 public:
  MonomialBasis(std::size_t n, int d, std::vector<MultiIndex> indices);

  std::size_t n() const { return n_; }
  int d() const { return d_; }
  /// Number of statistics, M - 1.
  std::size_t size() const { return indices_.size(); }
  /// M = C(n + d, d), counting the constant monomial.
  std::size_t M() const { return indices_.size() + 1; }

  const MultiIndex& operator[](std::size_t j) const { return indices_[j]; }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  std::optional<std::size_t> index_of(const MultiIndex& m) const;

  /// Exponent of variable i in statistic j.
  int exponent(std::size_t j, std::size_t i) const { return exps_[j * n_ + i]; }

 private:
  std::size_t n_;
  int d_;
  std::vector<MultiIndex> indices_;
  std::vector<int> exps_;
  std::unordered_map<MultiIndex, std::size_t, MultiIndexHash> lookup_;
};

using BasisPtr = std::shared_ptr<const MonomialBasis>;

/// Rejects even or nonpositive d and n == 0.
MonomialBasis enumerate_basis(std::size_t n, int d);
BasisPtr make_basis(std::size_t n, int d);

/// Sparse polynomial in n variables; zero coefficients are never stored.
class PolyCoeffs {
 public:
  using Terms = std::map<MultiIndex, double, GradedLess>;

  explicit PolyCoeffs(std::size_t n = 0) : n_(n) {}
  static PolyCoeffs constant(std::size_t n, double c);
  static PolyCoeffs monomial(const MultiIndex& m, double c = 1.0);

  std::size_t n() const { return n_; }
  /// Maximum stored total degree; 0 for the zero polynomial.
  int degree() const;
  bool is_zero() const { return terms_.empty(); }
  const Terms& terms() const { return terms_; }
  double coeff(const MultiIndex& m) const;

  void add_term(const MultiIndex& m, double c);
  void set_term(const MultiIndex& m, double c);

  double evaluate(std::span<const double> x) const;

  PolyCoeffs& operator+=(const PolyCoeffs& other);
  PolyCoeffs& operator*=(double s);
  friend PolyCoeffs operator+(PolyCoeffs a, const PolyCoeffs& b) { return a += b; }
  friend PolyCoeffs operator-(PolyCoeffs a, const PolyCoeffs& b);
  friend PolyCoeffs operator*(const PolyCoeffs& a, const PolyCoeffs& b);
  friend PolyCoeffs operator*(PolyCoeffs a, double s) { return a *= s; }
  friend PolyCoeffs operator*(double s, PolyCoeffs a) { return a *= s; }

 private:
  std::size_t n_;
  Terms terms_;
};

// --- sufficient statistics and derivatives -------------------------------

Eigen::VectorXd eval_suffstats(const MonomialBasis& basis, std::span<const double> x);
/// (M-1) x n; entry (j, i) = d_j(i) * x^{d_j - e_i}.
Eigen::MatrixXd eval_jacobian(const MonomialBasis& basis, std::span<const double> x);
Eigen::VectorXd eval_laplacian(const MonomialBasis& basis, std::span<const double> x);

/// <theta, T> as a polynomial (no constant term).
PolyCoeffs theta_to_poly(const MonomialBasis& basis, const Eigen::VectorXd& theta);
/// Coefficients of f on the basis; the constant term is dropped. Throws if
/// f has a monomial of degree above basis.d() or a different dimension.
Eigen::VectorXd poly_to_theta(const MonomialBasis& basis, const PolyCoeffs& f);

// --- norms ---------------------------------------------------------------

/// (sum_d a_d^2)^{1/2}, constant term included.
double monomial_norm(const PolyCoeffs& f);
/// ||f||_{L2} under Unif([-1,1]^n), computed exactly from cube moments.
double l2_cube_norm(const PolyCoeffs& f);

// --- Legendre change of basis --------------------------------------------

struct LegendrePoly {
  PolyCoeffs raw;         // L_k
  PolyCoeffs normalized;  // sqrt((2k+1)/2) * L_k
};

/// Expands L_k(x) = 2^-k sum_j C(k,j)^2 (x-1)^{k-j} (x+1)^j.
LegendrePoly legendre_1d(int k);

/// Coefficients over the tensor basis prod_i sqrt(2k_i+1) L_{k_i}(x_i),
/// which is orthonormal under the uniform measure on [-1,1]^n, so the sum of
/// squared coefficients equals l2_cube_norm(f)^2.
using LegendreCoeffs = std::map<MultiIndex, double, GradedLess>;

LegendreCoeffs to_legendre(const PolyCoeffs& f, int d);
PolyCoeffs from_legendre(std::size_t n, const LegendreCoeffs& b, int d);

/// ||f||_m^2 <= C(n+d,d) (4e)^d ||f||_{L2}^2.
Check check_mon_l2_bound(const PolyCoeffs& f, std::size_t n, int d);

/// d R^{d-1}: Lipschitz constant of any monomial of degree <= d on the
/// l_inf ball of radius R, w.r.t. the l_inf norm.
double monomial_lipschitz_bound(int d, double R);

}  // namespace polyscore
