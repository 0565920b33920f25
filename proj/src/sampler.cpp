#include "polyscore/sampler.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "polyscore/errors.hpp"
#include "polyscore/parallel.hpp"
#include "polyscore/rng.hpp"

namespace polyscore {

bool is_separable(const ParamVector& p) {
  for (std::size_t j : p.active()) {
    int support = 0;
    for (std::size_t i = 0; i < p.n(); ++i) support += p.basis().exponent(j, i) > 0;
    if (support > 1) return false;
  }
  return true;
}

// --- exact separable sampler ------------------------------------------------------

namespace {

// Piecewise-linear density on a uniform grid with its cumulative integral.
class InverseCdf1d {
 public:
  explicit InverseCdf1d(std::vector<double> coeffs, int d) : c_(std::move(coeffs)), d_(d) {
    auto logg = [&](double z) {
      double h = 0.0;
      for (int k = d_; k >= 1; --k) h = (h + c_[k]) * z;
      return h - std::pow(z, d_ + 1);
    };
    double bound = 0.0;
    for (int k = 1; k <= d_; ++k) bound += std::abs(c_[k]);
    double R = 1.0;
    while (std::pow(R, d_ + 1) - bound * std::pow(R, d_) < 80.0) R *= 1.25;

    const int scan = 20001;
    const double hs = 2.0 * R / (scan - 1);
    std::vector<double> vals(scan);
    double vmax = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < scan; ++i) {
      vals[i] = logg(-R + i * hs);
      vmax = std::max(vmax, vals[i]);
    }
    int lo = 0, hi = scan - 1;
    while (lo < scan && vals[lo] < vmax - 60.0) ++lo;
    while (hi > 0 && vals[hi] < vmax - 60.0) --hi;
    a_ = -R + std::max(0, lo - 1) * hs;
    const double b = -R + std::min(scan - 1, hi + 1) * hs;
    h_ = (b - a_) / static_cast<double>(kExactGridNodes - 1);
    f_.resize(kExactGridNodes);
    cum_.assign(kExactGridNodes, 0.0);
    for (std::size_t i = 0; i < kExactGridNodes; ++i) f_[i] = std::exp(logg(a_ + h_ * i) - vmax);
    for (std::size_t i = 1; i < kExactGridNodes; ++i) cum_[i] = cum_[i - 1] + 0.5 * h_ * (f_[i - 1] + f_[i]);
  }

  double draw(double u) const {
    const double t = u * cum_.back();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), t);
    std::size_t seg = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cum_.begin())) - 1;
    seg = std::min(seg, cum_.size() - 2);
    const double rem = t - cum_[seg];
    const double f0 = f_[seg];
    const double slope = (f_[seg + 1] - f0) / h_;
    // Solve f0 s + slope s^2 / 2 = rem on [0, h].
    double s;
    const double disc = f0 * f0 + 2.0 * slope * rem;
    if (f0 + std::sqrt(std::max(0.0, disc)) > 0.0) {
      s = 2.0 * rem / (f0 + std::sqrt(std::max(0.0, disc)));
    } else {
      s = 0.5 * h_;
    }
    s = std::clamp(s, 0.0, h_);
    return a_ + h_ * static_cast<double>(seg) + s;
  }

 private:
  std::vector<double> c_;
  int d_;
  double a_ = 0.0, h_ = 0.0;
  std::vector<double> f_, cum_;
};

}  // namespace

SampleSet sample_exact_separable(const ParamVector& p, std::size_t N, std::uint64_t seed) {
  if (!is_separable(p)) {
    throw std::invalid_argument("sample_exact_separable: theta couples coordinates (cross monomials present)");
  }
  const std::size_t n = p.n();
  const int d = p.d();
  SampleSet s;
  s.n = n;
  s.N = N;
  s.seed = seed;
  s.data.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(n));
  s.provenance.method = "exact";
  s.provenance.grid_nodes = kExactGridNodes;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> c(static_cast<std::size_t>(d) + 1, 0.0);
    for (std::size_t j : p.active()) {
      const int e = p.basis().exponent(j, i);
      if (e > 0) c[e] += p.theta()[j];
    }
    const InverseCdf1d sampler(std::move(c), d);
    RandomStream stream(seed, i);
    for (std::size_t k = 0; k < N; ++k) s.data(k, i) = sampler.draw(stream.uniform());
  }
  return s;
}

// --- MALA ----------------------------------------------------------------------------

double autocorrelation(std::span<const double> x, std::size_t lag) {
  const std::size_t N = x.size();
  if (lag >= N) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(N);
  double var = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < N; ++i) var += (x[i] - mean) * (x[i] - mean);
  for (std::size_t i = 0; i + lag < N; ++i) cov += (x[i] - mean) * (x[i + lag] - mean);
  return var > 0.0 ? cov / var : 0.0;
}

double effective_sample_size(std::span<const double> x) {
  const std::size_t N = x.size();
  if (N < 4) return static_cast<double>(N);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(N);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  if (!(var > 0.0)) return static_cast<double>(N);
  auto rho = [&](std::size_t lag) {
    double cov = 0.0;
    for (std::size_t i = 0; i + lag < N; ++i) cov += (x[i] - mean) * (x[i + lag] - mean);
    return cov / var;
  };
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < N; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  return static_cast<double>(N) / std::max(tau, 1e-12);
}

namespace {

struct ChainResult {
  SampleMatrix draws;
  double step_size = 0.0;
  std::size_t thinning = 1;
  double acceptance = 0.0;
  std::size_t orthant_changes = 0;
  std::vector<std::string> notes;
};

class MalaChain {
 public:
  MalaChain(const ParamVector& p, const McmcConfig& cfg, std::uint64_t seed, std::size_t chain)
      : p_(p), cfg_(cfg), stream_(seed, chain), chain_(chain), n_(p.n()), x_(n_, 0.0), g_(n_), y_(n_), gy_(n_) {
    if (cfg.initial) {
      if (cfg.initial->size() != n_) throw std::invalid_argument("MALA initial point has the wrong dimension");
      x_ = *cfg.initial;
    }
    logf_ = log_density_and_score(p_, x_, g_);
    if (!std::isfinite(logf_)) throw NumericalError("MALA initial point has non-finite density");
    eps_ = cfg.step_size;
    sign_ = signs(x_);
  }

  // One Metropolis-adjusted Langevin step; returns the acceptance probability.
  double step() {
    const double e2 = 0.5 * eps_ * eps_;
    for (std::size_t i = 0; i < n_; ++i) y_[i] = x_[i] + e2 * g_[i] + eps_ * stream_.normal();
    double logf_y;
    bool finite_y = true;
    for (double v : y_) finite_y = finite_y && std::isfinite(v);
    if (!finite_y) {
      throw NumericalError("MALA chain " + std::to_string(chain_) + " diverged (non-finite proposal)");
    }
    logf_y = log_density_and_score(p_, y_, gy_);
    if (std::isnan(logf_y) || logf_y == std::numeric_limits<double>::infinity()) {
      throw NumericalError("MALA chain " + std::to_string(chain_) + " diverged (log density " +
                           std::to_string(logf_y) + ")");
    }
    double fwd = 0.0, bwd = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double a = y_[i] - x_[i] - e2 * g_[i];
      const double b = x_[i] - y_[i] - e2 * gy_[i];
      fwd += a * a;
      bwd += b * b;
    }
    const double log_ratio = logf_y - logf_ + (fwd - bwd) / (4.0 * e2);
    const double accept = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
    if (stream_.uniform() < accept) {
      std::swap(x_, y_);
      std::swap(g_, gy_);
      logf_ = logf_y;
      auto s = signs(x_);
      if (s != sign_) {
        ++orthant_changes_;
        sign_ = std::move(s);
      }
    }
    return accept;
  }

  ChainResult run(std::size_t draws) {
    ChainResult out;
    // Robbins–Monro adaptation of log(eps) toward the target acceptance.
    for (std::size_t t = 0; t < cfg_.burn_in; ++t) {
      const double a = step();
      eps_ *= std::exp((a - cfg_.target_accept) / std::pow(static_cast<double>(t) + 10.0, 0.6));
      eps_ = std::clamp(eps_, 1e-12, 1e6);
    }
    std::size_t thin = std::max<std::size_t>(1, cfg_.thinning);
    if (cfg_.adapt_thinning) {
      std::vector<double> pilot(cfg_.pilot_length);
      for (auto& v : pilot) {
        step();
        v = x_[0];
      }
      std::size_t k = thin;
      while (k < cfg_.max_thinning && autocorrelation(pilot, k) >= 0.5) ++k;
      if (k >= cfg_.max_thinning && autocorrelation(pilot, k) >= 0.5) {
        out.notes.push_back("chain " + std::to_string(chain_) + ": lag-" + std::to_string(k) +
                            " autocorrelation still >= 0.5; thinning capped");
      }
      thin = k;
    }
    out.draws.resize(static_cast<Eigen::Index>(draws), static_cast<Eigen::Index>(n_));
    double acc = 0.0;
    for (std::size_t r = 0; r < draws; ++r) {
      for (std::size_t t = 0; t < thin; ++t) acc += step();
      for (std::size_t i = 0; i < n_; ++i) out.draws(r, i) = x_[i];
    }
    out.step_size = eps_;
    out.thinning = thin;
    out.acceptance = draws ? acc / static_cast<double>(draws * thin) : 0.0;
    out.orthant_changes = orthant_changes_;
    return out;
  }

 private:
  static std::vector<bool> signs(const std::vector<double>& x) {
    std::vector<bool> s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) s[i] = x[i] >= 0.0;
    return s;
  }

  const ParamVector& p_;
  const McmcConfig& cfg_;
  RandomStream stream_;
  std::size_t chain_;
  std::size_t n_;
  std::vector<double> x_, g_, y_, gy_;
  double logf_ = 0.0;
  double eps_ = 0.0;
  std::vector<bool> sign_;
  std::size_t orthant_changes_ = 0;
};

}  // namespace

SampleSet sample_mala(const ParamVector& p, std::size_t N, const McmcConfig& config, std::uint64_t seed) {
  if (!(config.step_size > 0.0)) throw std::invalid_argument("MALA step size must be positive");
  if (config.thinning < 1) throw std::invalid_argument("MALA thinning must be >= 1");
  if (config.chains < 1) throw std::invalid_argument("MALA needs at least one chain");
  if (!(config.target_accept > 0.0 && config.target_accept < 1.0)) {
    throw std::invalid_argument("MALA target acceptance must lie in (0, 1)");
  }
  const std::size_t chains = config.chains;
  const std::size_t per_chain = (N + chains - 1) / chains;
  std::vector<ChainResult> results(chains);
  parallel_chunks(chains, [&](std::size_t c) {
    MalaChain chain(p, config, seed, c);
    results[c] = chain.run(per_chain);
  });

  SampleSet s;
  s.n = p.n();
  s.N = N;
  s.seed = seed;
  s.data.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(p.n()));
  s.provenance.method = "mcmc";
  s.provenance.config = config;
  s.provenance.ess.assign(p.n(), 0.0);
  std::size_t row = 0;
  for (const auto& r : results) {
    const std::size_t take = std::min<std::size_t>(per_chain, N - row);
    s.data.middleRows(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(take)) =
        r.draws.topRows(static_cast<Eigen::Index>(take));
    for (std::size_t i = 0; i < p.n(); ++i) {
      std::vector<double> col(take);
      for (std::size_t k = 0; k < take; ++k) col[k] = r.draws(k, i);
      s.provenance.ess[i] += effective_sample_size(col);
    }
    row += take;
    s.provenance.step_size += r.step_size / static_cast<double>(chains);
    s.provenance.acceptance_rate += r.acceptance / static_cast<double>(chains);
    s.provenance.thinning = std::max(s.provenance.thinning, r.thinning);
    s.provenance.orthant_changes += r.orthant_changes;
    s.provenance.notes.insert(s.provenance.notes.end(), r.notes.begin(), r.notes.end());
  }
  return s;
}

// --- diagnostics -------------------------------------------------------------------

DiagnosticsReport diagnostics(const SampleSet& s, const ParamVector& p, const QuadratureGrid& grid) {
  if (s.N == 0) throw std::invalid_argument("diagnostics: empty sample set");
  if (s.n != p.n() || grid.n != s.n) throw std::invalid_argument("diagnostics: dimension mismatch");
  const MonomialBasis& basis = p.basis();
  const auto m = static_cast<Eigen::Index>(basis.size());
  const MomentTable table = moment_table(p, grid, 4 * p.d());

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t k = 0; k < s.N; ++k) {
    const Eigen::VectorXd t = eval_suffstats(basis, s.row(k));
    mean += t;
    second.noalias() += t * t.transpose();
  }
  mean /= static_cast<double>(s.N);
  second /= static_cast<double>(s.N);

  DiagnosticsReport r;
  r.N = s.N;
  r.effective_N = static_cast<double>(s.N);
  if (s.provenance.method == "mcmc" && !s.provenance.ess.empty()) {
    r.effective_N = *std::min_element(s.provenance.ess.begin(), s.provenance.ess.end());
  }
  r.z_mean.resize(m);
  r.z_second.resize(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const double ea = table(basis[a]);
    const double var = table(basis[a] + basis[a]) - ea * ea;
    r.z_mean[a] = (mean[a] - ea) / std::sqrt(std::max(var, 1e-300) / r.effective_N);
    for (Eigen::Index b = 0; b < m; ++b) {
      const MultiIndex ab = basis[a] + basis[b];
      const double eab = table(ab);
      const double vab = table(ab + ab) - eab * eab;
      r.z_second(a, b) = (second(a, b) - eab) / std::sqrt(std::max(vab, 1e-300) / r.effective_N);
    }
  }
  r.max_z = std::max(r.z_mean.cwiseAbs().maxCoeff(), r.z_second.cwiseAbs().maxCoeff());
  return r;
}

double ks_statistic(std::vector<double> values, const std::function<double(double)>& cdf) {
  if (values.empty()) throw std::invalid_argument("ks_statistic: no values");
  std::sort(values.begin(), values.end());
  const double N = static_cast<double>(values.size());
  double D = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double F = cdf(values[i]);
    D = std::max({D, std::abs(F - static_cast<double>(i) / N), std::abs(static_cast<double>(i + 1) / N - F)});
  }
  return D;
}

// --- file format ------------------------------------------------------------------

void write_samples(const std::string& path, const SampleSet& s) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  std::fprintf(f, "polyscore-samples v1 n=%zu N=%zu seed=%" PRIu64 "\n", s.n, s.N, s.seed);
  for (std::size_t k = 0; k < s.N; ++k) {
    for (std::size_t i = 0; i < s.n; ++i) std::fprintf(f, i ? " %.17g" : "%.17g", s.data(k, i));
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) throw IoError("failed writing '" + path + "'");
}

SampleSet read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open samples file '" + path + "'");
  std::string header;
  std::getline(in, header);
  std::size_t n = 0, N = 0;
  unsigned long long seed = 0;
  if (std::sscanf(header.c_str(), "polyscore-samples v1 n=%zu N=%zu seed=%llu", &n, &N, &seed) != 3 || n == 0) {
    throw ParseError("'" + path + "' is not a polyscore-samples v1 file");
  }
  SampleSet s;
  s.n = n;
  s.N = N;
  s.seed = seed;
  s.provenance.method = "file";
  s.data.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(n));
  std::string line;
  for (std::size_t k = 0; k < N; ++k) {
    if (!std::getline(in, line)) {
      throw ParseError("'" + path + "': expected " + std::to_string(N) + " rows, found " + std::to_string(k));
    }
    std::istringstream row(line);
    for (std::size_t i = 0; i < n; ++i) {
      std::string tok;
      if (!(row >> tok)) throw ParseError("'" + path + "': row " + std::to_string(k + 1) + " is too short");
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size() || !std::isfinite(v)) {
        throw ParseError("'" + path + "': bad value '" + tok + "' in row " + std::to_string(k + 1));
      }
      s.data(k, i) = v;
    }
    std::string extra;
    if (row >> extra) throw ParseError("'" + path + "': row " + std::to_string(k + 1) + " has extra values");
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw ParseError("'" + path + "': more rows than the header declares");
    }
  }
  return s;
}

}  // namespace polyscore
