#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polyscore/expfam.hpp"

namespace polyscore {

using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct McmcConfig {
  double step_size = 0.5;  // initial value; adapted during burn-in
  std::size_t burn_in = 10'000;
  std::size_t thinning = 1;  // lower bound for the automatic choice
  double target_accept = 0.574;
  std::size_t chains = 1;
  bool adapt_thinning = true;
  std::size_t max_thinning = 1000;
  std::size_t pilot_length = 4000;
  std::optional<std::vector<double>> initial;  // defaults to the origin
};

struct Provenance {
  std::string method;  // "exact", "mcmc" or "file"
  // exact
  std::size_t grid_nodes = 0;
  // mcmc
  McmcConfig config;
  double step_size = 0.0;  // after adaptation
  std::size_t thinning = 0;
  double acceptance_rate = 0.0;
  std::vector<double> ess;
  std::size_t orthant_changes = 0;  // sign-pattern changes over the whole run
  std::vector<std::string> notes;
};

struct SampleSet {
  std::size_t n = 0;
  std::size_t N = 0;
  SampleMatrix data;  // N x n
  std::uint64_t seed = 0;
  Provenance provenance;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * n, n}; }
};

/// True when every nonzero theta_j involves a single coordinate.
bool is_separable(const ParamVector& p);

/// Inverse-CDF sampling of each coordinate from a piecewise-linear density on
/// kExactGridNodes nodes spanning the region within e^-60 of the mode.
inline constexpr std::size_t kExactGridNodes = 16385;
SampleSet sample_exact_separable(const ParamVector& p, std::size_t N, std::uint64_t seed);

SampleSet sample_mala(const ParamVector& p, std::size_t N, const McmcConfig& config, std::uint64_t seed);

/// Geyer initial-positive-sequence effective sample size of a scalar series.
double effective_sample_size(std::span<const double> series);
/// Lag-k sample autocorrelation.
double autocorrelation(std::span<const double> series, std::size_t lag);

struct DiagnosticsReport {
  std::size_t N = 0;
  double effective_N = 0.0;
  Eigen::VectorXd z_mean;    // per statistic
  Eigen::MatrixXd z_second;  // per pair
  double max_z = 0.0;
};

/// Standardized discrepancies of the sample means of T and TT^T against the
/// quadrature oracle; MCMC sets are standardized with the smallest ESS.
DiagnosticsReport diagnostics(const SampleSet& s, const ParamVector& p, const QuadratureGrid& grid);

/// sup |F_N - F| for one coordinate against a reference CDF.
double ks_statistic(std::vector<double> values, const std::function<double(double)>& cdf);

void write_samples(const std::string& path, const SampleSet& s);
SampleSet read_samples(const std::string& path);

}  // namespace polyscore
