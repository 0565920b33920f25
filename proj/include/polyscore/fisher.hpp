#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyscore/check.hpp"
#include "polyscore/expfam.hpp"
#include "polyscore/sampler.hpp"

namespace polyscore {

/// Quadrature noise below this magnitude is clipped to zero in covariance spectra.
inline constexpr double kEigenClipTol = 1e-10;

/// Cov_p(T) by quadrature. Throws GridNotConverged when the grid fails the gate at p.
Eigen::MatrixXd fisher_info(const ParamVector& p, const QuadratureGrid& grid);
/// Empirical Cov(T) (1/N normalization).
Eigen::MatrixXd fisher_info(const ParamVector& p, const SampleSet& s);

/// E_p[JT JT^T], the quadratic form of E||grad <w,T>||^2.
Eigen::MatrixXd score_gram(const ParamVector& p, const QuadratureGrid& grid);

struct Spectrum {
  Eigen::VectorXd eigenvalues;  // ascending, after clipping
  std::vector<std::string> notes;
};
/// Symmetric eigenvalues with values in [-kEigenClipTol, 0) set to zero; more
/// negative values throw NumericalError.
Spectrum psd_spectrum(const Eigen::MatrixXd& A);

struct PoincareResult {
  double C_P = 0.0;
  Eigen::VectorXd w;  // maximizer of w^T I w / w^T G w
};

/// Largest generalized eigenvalue of the pencil (I, G) via G = LL^T and the
/// symmetric eigenproblem of L^-1 I L^-T. Throws NumericalError when G is not
/// positive definite; basis, when given, names the null directions.
PoincareResult poincare_pencil(const Eigen::MatrixXd& I, const Eigen::MatrixXd& G,
                               const MonomialBasis* basis = nullptr);
double restricted_poincare(const Eigen::MatrixXd& I, const Eigen::MatrixXd& G);

struct SmoothnessMoments {
  double E_opJT4 = 0.0;      // E ||JT||_op^4
  double E_dT2 = 0.0;        // E ||Delta T||^2
  double E_grad_log_h4 = 0.0;  // E ||grad log h||^4
};
SmoothnessMoments smoothness_moments(const ParamVector& p, const QuadratureGrid& grid);
SmoothnessMoments smoothness_moments(const ParamVector& p, const SampleSet& s);

/// 2 C_P^2 (||theta||^2 E||JT||_op^4 + E||Delta T||^2) / lambda_min^2.
double gamma_bound(const ParamVector& p, double C_P, double lambda_min, const SmoothnessMoments& m);

/// Sandwich covariance G^-1 Cov(psi) G^-1 of sqrt(N)(theta_SM - theta), with
/// psi(x) = JT JT^T theta + Delta T + JT grad log h, by quadrature.
Eigen::MatrixXd sm_asymptotic_covariance(const ParamVector& p, const QuadratureGrid& grid);

/// Finiteness of the moments the score-matching asymptotics rely on.
std::vector<Check> regularity_preflight(const ParamVector& p, const QuadratureGrid& grid);

struct SpectralReport {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double C_P = 0.0;
  double gamma_bound = 0.0;  // NaN when lambda_min <= 0
  std::vector<Check> checks;
  std::vector<std::string> notes;
};

struct VerifyBoundsOptions {
  std::uint64_t seed = 0;
  std::size_t probes = 100;
  /// Fault injection: negate the smallest eigenvalue of I before the checks.
  bool corrupt_fisher = false;
};

/// The explicit appendix bounds at p: lambda_max, ||E T||^2, E||Delta T||^2,
/// positivity of lambda_min, the variance lower bound for constant-free
/// polynomials, Var(<w,T>) = w^T I w, and the condition-number bound on C_P.
SpectralReport verify_bounds(const ParamVector& p, const QuadratureGrid& grid, const VerifyBoundsOptions& options = {});

}  // namespace polyscore
