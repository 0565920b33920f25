#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyscore/expfam.hpp"
#include "polyscore/sampler.hpp"

namespace polyscore {

enum class Estimator { SM, MLE };
std::string to_string(Estimator e);
/// Accepts "sm" / "mle" (any case).
Estimator parse_estimator(const std::string& s);

struct FitReport {
  Estimator estimator = Estimator::SM;
  Eigen::VectorXd theta_hat;
  double loss = 0.0;
  double gram_condition = 1.0;
  std::size_t N = 0;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  double wall_time = 0.0;
  std::vector<std::string> notes;
};

// --- score matching -----------------------------------------------------------------

/// Empirical pieces of the score-matching objective
///   loss(theta) = c + <theta, b> + theta^T G theta / 2.
struct SmStatistics {
  Eigen::MatrixXd G;  // E[JT JT^T]
  Eigen::VectorXd b;  // E[Delta T + JT grad log h]
  double c = 0.0;     // E[Delta log h + |grad log h|^2 / 2]
  std::size_t N = 0;
};
SmStatistics sm_statistics(const SampleSet& s, const MonomialBasis& basis);

/// E_hat[tr Hess log p_theta + |grad log p_theta|^2 / 2], evaluated per sample.
double sm_loss(const ParamVector& theta, const SampleSet& s);

/// Relative ridge applied when G cannot be factored as is.
inline constexpr double kRidgeScale = 1e-10;
FitReport fit_score_matching(const SampleSet& s, const BasisPtr& basis);

// --- maximum likelihood ---------------------------------------------------------------

struct MleLoss {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// E_hat[log h] + <theta, E_hat T> - log Z and its gradient E_hat T - E_theta T.
/// Throws GridNotConverged when the grid fails the gate at theta.
MleLoss mle_loss_and_grad(const ParamVector& theta, const SampleSet& s, const QuadratureGrid& grid);

struct MleOptions {
  double tol = 1e-6;
  std::size_t max_iter = 10'000;
  double armijo = 1e-4;
  double shrink = 0.5;
  /// Rebuild the grid around the iterate when the gate fails at the optimum.
  bool regrid = false;
};

/// Gradient ascent with backtracking on the concave log-likelihood.
FitReport fit_mle(const SampleSet& s, const BasisPtr& basis, const QuadratureGrid& grid, const Eigen::VectorXd& init,
                  const MleOptions& options = {});

// --- convergence studies ------------------------------------------------------------

struct StudyRow {
  Estimator estimator;
  std::size_t n = 0;
  int d = 0;
  double B = 0.0;
  std::size_t N = 0;
  std::size_t trial = 0;
  double error_sq = 0.0;
  double wall_time_s = 0.0;
};

struct StudySummary {
  Estimator estimator;
  std::vector<std::size_t> Ns;
  std::vector<double> median_error_sq;
  double slope = 0.0;
};

struct StudyResult {
  std::vector<StudyRow> rows;
  std::vector<StudySummary> summaries;
  /// median SM error / median MLE error per N, when both ran.
  std::vector<double> ratio_sm_mle;
  std::vector<std::string> notes;
};

struct StudyOptions {
  McmcConfig mcmc;
  MleOptions mle{.tol = 1e-6, .max_iter = 10'000, .armijo = 1e-4, .shrink = 0.5, .regrid = true};
};

/// For every N and trial: draw N samples from theta_star (exact when separable,
/// MALA otherwise), fit each estimator, and record ||theta_hat - theta_star||^2.
StudyResult convergence_study(const ParamVector& theta_star, const std::vector<std::size_t>& Ns, std::size_t trials,
                              const std::vector<Estimator>& estimators, std::uint64_t seed,
                              const StudyOptions& options = {});

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// CSV with columns estimator,n,d,B,N,trial,error_sq,wall_time_s.
std::string study_csv(const StudyResult& r);

}  // namespace polyscore
