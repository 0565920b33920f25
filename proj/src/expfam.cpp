#include "polyscore/expfam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "polyscore/errors.hpp"
#include "polyscore/parallel.hpp"

namespace polyscore {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite coordinate in x");
  }
}

void require_dim(const ParamVector& p, std::span<const double> x) {
  if (x.size() != p.n()) {
    throw std::invalid_argument("dimension mismatch: family has n=" + std::to_string(p.n()) +
                                " but x has " + std::to_string(x.size()) + " entries");
  }
}

}  // namespace

// --- ParamVector ------------------------------------------------------------------

ParamVector::ParamVector(BasisPtr basis, Eigen::VectorXd theta, double B)
    : basis_(std::move(basis)), theta_(std::move(theta)), B_(B) {
  if (!basis_) throw std::invalid_argument("ParamVector: null basis");
  if (static_cast<std::size_t>(theta_.size()) != basis_->size()) {
    throw std::invalid_argument("ParamVector: theta has " + std::to_string(theta_.size()) +
                                " entries but the basis has " + std::to_string(basis_->size()));
  }
  if (!(B_ >= 1.0) || !std::isfinite(B_)) throw std::invalid_argument("ParamVector: B must be finite and >= 1");
  if (!theta_.allFinite()) throw std::invalid_argument("ParamVector: theta must be finite");
  const double inf_norm = theta_.size() ? theta_.cwiseAbs().maxCoeff() : 0.0;
  if (inf_norm > B_ * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "ParamVector: ||theta||_inf = " << inf_norm << " exceeds B = " << B_;
    throw std::invalid_argument(msg.str());
  }
  for (Eigen::Index j = 0; j < theta_.size(); ++j) {
    if (theta_[j] != 0.0) active_.push_back(static_cast<std::size_t>(j));
  }
}

ParamVector ParamVector::unconstrained(BasisPtr basis, Eigen::VectorXd theta) {
  const double inf_norm = theta.size() ? theta.cwiseAbs().maxCoeff() : 0.0;
  return ParamVector(std::move(basis), std::move(theta), std::max(1.0, inf_norm));
}

ParamVector ParamVector::zero(BasisPtr basis, double B) {
  const auto m = static_cast<Eigen::Index>(basis->size());
  return ParamVector(std::move(basis), Eigen::VectorXd::Zero(m), B);
}

// --- density and score ------------------------------------------------------------

double log_base_measure(int d, std::span<const double> x) {
  double s = 0.0;
  for (double v : x) {
    const double v2 = v * v;
    double pw = 1.0;
    for (int k = 0; k < (d + 1) / 2; ++k) pw *= v2;
    s += pw;
  }
  return -s;
}

double log_density_and_score(const ParamVector& p, std::span<const double> x, std::span<double> grad) {
  require_dim(p, x);
  require_finite(x);
  const std::size_t n = p.n();
  const int d = p.d();
  const std::size_t stride = static_cast<std::size_t>(d) + 2;
  // pw[i * stride + k] = x_i^k for k <= d + 1
  double local[64];
  std::vector<double> heap;
  double* pw = local;
  if (n * stride > 64) {
    heap.resize(n * stride);
    pw = heap.data();
  }
  double logf = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = 1.0;
    for (std::size_t k = 0; k < stride; ++k) {
      pw[i * stride + k] = v;
      v *= x[i];
    }
    logf -= pw[i * stride + d + 1];
    if (!grad.empty()) grad[i] = -(d + 1) * pw[i * stride + d];
  }
  const MonomialBasis& basis = p.basis();
  const Eigen::VectorXd& theta = p.theta();
  for (std::size_t j : p.active()) {
    double mono = theta[j];
    for (std::size_t i = 0; i < n; ++i) mono *= pw[i * stride + basis.exponent(j, i)];
    logf += mono;
    if (grad.empty()) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const int di = basis.exponent(j, i);
      if (di == 0) continue;
      double g = theta[j] * di;
      for (std::size_t k = 0; k < n; ++k) g *= pw[k * stride + basis.exponent(j, k) - (k == i ? 1 : 0)];
      grad[i] += g;
    }
  }
  return logf;
}

double log_unnormalized_density(const ParamVector& p, std::span<const double> x) {
  return log_density_and_score(p, x, {});
}

Eigen::VectorXd score(const ParamVector& p, std::span<const double> x) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(p.n()));
  log_density_and_score(p, x, std::span<double>(g.data(), p.n()));
  return g;
}

// --- quadrature engine ------------------------------------------------------------

namespace {

// Sum of terms exp(scale) * (sum + comp), Neumaier-compensated per entry.
class ScaledSum {
 public:
  explicit ScaledSum(std::size_t k) : sum_(k, 0.0), comp_(k, 0.0) {}

  double scale() const { return scale_; }

  void add(double log_scale, std::span<const double> values) {
    if (log_scale == kNegInf) return;
    rescale_to(std::max(scale_, log_scale));
    const double f = std::exp(log_scale - scale_);
    for (std::size_t i = 0; i < sum_.size(); ++i) accumulate(i, f * values[i]);
  }

  void merge(const ScaledSum& other) {
    if (other.scale_ == kNegInf) return;
    rescale_to(std::max(scale_, other.scale_));
    const double f = std::exp(other.scale_ - scale_);
    for (std::size_t i = 0; i < sum_.size(); ++i) {
      accumulate(i, f * other.sum_[i]);
      accumulate(i, f * other.comp_[i]);
    }
  }

  double value(std::size_t i) const { return sum_[i] + comp_[i]; }

 private:
  void rescale_to(double s) {
    if (s == scale_) return;
    const double f = scale_ == kNegInf ? 0.0 : std::exp(scale_ - s);
    for (std::size_t i = 0; i < sum_.size(); ++i) {
      sum_[i] *= f;
      comp_[i] *= f;
    }
    scale_ = s;
  }

  void accumulate(std::size_t i, double v) {
    const double t = sum_[i] + v;
    if (std::abs(sum_[i]) >= std::abs(v)) {
      comp_[i] += (sum_[i] - t) + v;
    } else {
      comp_[i] += (v - t) + sum_[i];
    }
    sum_[i] = t;
  }

  double scale_ = kNegInf;
  std::vector<double> sum_;
  std::vector<double> comp_;
};

// Tensor grid traversed as rows along the last axis. For every row the log
// integrand (log weights included) is a univariate polynomial in the last
// coordinate, so each node costs one Horner evaluation.
class RowEngine {
 public:
  RowEngine(const ParamVector& p, const QuadratureGrid& grid, int extra_power)
      : p_(p), grid_(grid), n_(p.n()), q_(grid.points_per_axis()), d_(p.d()) {
    if (grid.n != p.n()) {
      throw std::invalid_argument("grid dimension " + std::to_string(grid.n) +
                                  " does not match family dimension " + std::to_string(p.n()));
    }
    pmax_ = std::max(d_ + 1, extra_power);
    stride_ = static_cast<std::size_t>(pmax_) + 1;
    pw_.resize(q_ * stride_);
    logw_.resize(q_);
    for (std::size_t k = 0; k < q_; ++k) {
      double v = 1.0;
      for (std::size_t e = 0; e < stride_; ++e) {
        pw_[k * stride_ + e] = v;
        v *= grid.nodes[k];
      }
      logw_[k] = std::log(grid.weights[k]);
    }
    rows_ = 1;
    for (std::size_t i = 0; i + 1 < n_; ++i) rows_ *= q_;
    rows_per_chunk_ = std::max<std::size_t>(1, (rows_ + 63) / 64);
    chunks_ = (rows_ + rows_per_chunk_ - 1) / rows_per_chunk_;
  }

  std::size_t chunks() const { return chunks_; }
  std::size_t q() const { return q_; }
  double power(std::size_t node, int e) const { return pw_[node * stride_ + e]; }
  double node(std::size_t k) const { return grid_.nodes[k]; }

  // fn(outer indices, row log scale, u) with u_k = w_k f(x) / exp(row scale)
  // including the outer weights.
  template <typename Fn>
  void run_chunk(std::size_t chunk, Fn&& fn) const {
    std::vector<std::size_t> outer(n_ > 0 ? n_ - 1 : 0);
    std::vector<double> coeff(static_cast<std::size_t>(d_) + 1);
    std::vector<double> v(q_), u(q_);
    const MonomialBasis& basis = p_.basis();
    const Eigen::VectorXd& theta = p_.theta();
    const std::size_t last = n_ - 1;
    const std::size_t begin = chunk * rows_per_chunk_;
    const std::size_t end = std::min(rows_, begin + rows_per_chunk_);
    for (std::size_t r = begin; r < end; ++r) {
      std::size_t rem = r;
      for (std::size_t i = 0; i < outer.size(); ++i) {
        outer[i] = rem % q_;
        rem /= q_;
      }
      std::fill(coeff.begin(), coeff.end(), 0.0);
      double base = 0.0;
      for (std::size_t i = 0; i < outer.size(); ++i) {
        base += logw_[outer[i]] - power(outer[i], d_ + 1);
      }
      for (std::size_t j : p_.active()) {
        double c = theta[j];
        for (std::size_t i = 0; i < outer.size(); ++i) c *= power(outer[i], basis.exponent(j, i));
        coeff[basis.exponent(j, last)] += c;
      }
      double vmax = kNegInf;
      for (std::size_t k = 0; k < q_; ++k) {
        const double z = grid_.nodes[k];
        double h = coeff[d_];
        for (int e = d_ - 1; e >= 0; --e) h = h * z + coeff[e];
        const double val = h - power(k, d_ + 1) + logw_[k];
        if (std::isnan(val) || val == std::numeric_limits<double>::infinity()) {
          throw NumericalError("log integrand is not finite on the quadrature grid");
        }
        v[k] = val;
        vmax = std::max(vmax, val);
      }
      if (vmax == kNegInf) continue;
      for (std::size_t k = 0; k < q_; ++k) u[k] = std::exp(v[k] - vmax);
      fn(std::span<const std::size_t>(outer), base + vmax, std::span<const double>(u));
    }
  }

 private:
  const ParamVector& p_;
  const QuadratureGrid& grid_;
  std::size_t n_, q_;
  int d_;
  int pmax_ = 0;
  std::size_t stride_ = 0;
  std::vector<double> pw_, logw_;
  std::size_t rows_ = 1, rows_per_chunk_ = 1, chunks_ = 1;
};

// Mixed-radix index over (K+1)^n.
std::size_t dense_index(std::span<const int> e, int K) {
  std::size_t idx = 0;
  std::size_t mul = 1;
  for (int v : e) {
    idx += static_cast<std::size_t>(v) * mul;
    mul *= static_cast<std::size_t>(K) + 1;
  }
  return idx;
}

// All exponent tuples of length m with total <= K.
std::vector<std::vector<int>> bounded_tuples(std::size_t m, int K) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(m, 0);
  auto rec = [&](auto&& self, std::size_t i, int left) -> void {
    if (i == m) {
      out.push_back(cur);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      cur[i] = v;
      self(self, i + 1, left - v);
    }
    cur[i] = 0;
  };
  rec(rec, 0, K);
  return out;
}

ScaledSum merge_in_order(std::vector<ScaledSum>& parts, std::size_t k) {
  ScaledSum total(k);
  for (const auto& part : parts) total.merge(part);
  return total;
}

}  // namespace

MomentTable::MomentTable(std::size_t n, int max_total, double log_z, std::vector<double> values)
    : n_(n), max_total_(max_total), log_z_(log_z), values_(std::move(values)) {}

double MomentTable::at(std::span<const int> e) const {
  if (e.size() != n_) throw std::invalid_argument("MomentTable: dimension mismatch");
  int total = 0;
  for (int v : e) total += v;
  if (total > max_total_) {
    throw std::invalid_argument("MomentTable: moment of order " + std::to_string(total) +
                                " exceeds table order " + std::to_string(max_total_));
  }
  return values_[dense_index(e, max_total_)];
}

double MomentTable::operator()(const MultiIndex& e) const { return at(e.degrees()); }

MomentTable moment_table(const ParamVector& p, const QuadratureGrid& grid, int max_total) {
  if (max_total < 0) throw std::invalid_argument("moment_table: negative order");
  const RowEngine engine(p, grid, max_total);
  const std::size_t n = p.n();
  const int K = max_total;
  std::size_t dense = 1;
  for (std::size_t i = 0; i < n; ++i) dense *= static_cast<std::size_t>(K) + 1;
  const auto outer_tuples = bounded_tuples(n - 1, K);
  std::vector<std::size_t> outer_index;
  for (const auto& t : outer_tuples) {
    std::vector<int> full(t);
    full.push_back(0);
    outer_index.push_back(dense_index(full, K));
  }
  const std::size_t last_mul = [&] {
    std::size_t m = 1;
    for (std::size_t i = 0; i + 1 < n; ++i) m *= static_cast<std::size_t>(K) + 1;
    return m;
  }();

  std::vector<ScaledSum> parts(engine.chunks(), ScaledSum(dense));
  parallel_chunks(engine.chunks(), [&](std::size_t c) {
    std::vector<double> sums(static_cast<std::size_t>(K) + 1);
    std::vector<double> contrib(dense, 0.0);
    engine.run_chunk(c, [&](std::span<const std::size_t> outer, double log_scale, std::span<const double> u) {
      std::fill(sums.begin(), sums.end(), 0.0);
      for (std::size_t k = 0; k < u.size(); ++k) {
        if (u[k] == 0.0) continue;
        for (int e = 0; e <= K; ++e) sums[e] += u[k] * engine.power(k, e);
      }
      for (std::size_t t = 0; t < outer_tuples.size(); ++t) {
        const auto& eo = outer_tuples[t];
        double mono = 1.0;
        int used = 0;
        for (std::size_t i = 0; i < eo.size(); ++i) {
          mono *= engine.power(outer[i], eo[i]);
          used += eo[i];
        }
        for (int e = 0; e <= K - used; ++e) contrib[outer_index[t] + e * last_mul] = mono * sums[e];
      }
      parts[c].add(log_scale, contrib);
    });
  });
  const ScaledSum total = merge_in_order(parts, dense);
  const double z0 = total.value(0);
  if (total.scale() == kNegInf || !(z0 > 0.0)) {
    throw NumericalError("every integrand evaluation underflowed; the grid misses the mass of p_theta");
  }
  std::vector<double> values(dense, 0.0);
  for (std::size_t i = 0; i < dense; ++i) values[i] = total.value(i) / z0;
  return MomentTable(n, K, total.scale() + std::log(z0), std::move(values));
}

Expectation nodewise_expectation(const ParamVector& p, const QuadratureGrid& grid, std::size_t k,
                                 const NodeFunction& g) {
  const RowEngine engine(p, grid, 0);
  const std::size_t n = p.n();
  std::vector<ScaledSum> parts(engine.chunks(), ScaledSum(k + 1));
  parallel_chunks(engine.chunks(), [&](std::size_t c) {
    std::vector<double> x(n), out(k), row(k + 1);
    engine.run_chunk(c, [&](std::span<const std::size_t> outer, double log_scale, std::span<const double> u) {
      std::fill(row.begin(), row.end(), 0.0);
      for (std::size_t i = 0; i < outer.size(); ++i) x[i] = engine.node(outer[i]);
      for (std::size_t j = 0; j < u.size(); ++j) {
        if (u[j] == 0.0) continue;
        x[n - 1] = engine.node(j);
        std::fill(out.begin(), out.end(), 0.0);
        g(x, out);
        row[0] += u[j];
        for (std::size_t i = 0; i < k; ++i) row[i + 1] += u[j] * out[i];
      }
      parts[c].add(log_scale, row);
    });
  });
  const ScaledSum total = merge_in_order(parts, k + 1);
  const double z0 = total.value(0);
  if (total.scale() == kNegInf || !(z0 > 0.0)) {
    throw NumericalError("every integrand evaluation underflowed; the grid misses the mass of p_theta");
  }
  Expectation out;
  out.log_z = total.scale() + std::log(z0);
  out.value.resize(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) out.value[static_cast<Eigen::Index>(i)] = total.value(i + 1) / z0;
  return out;
}

double log_partition(const ParamVector& p, const QuadratureGrid& grid) {
  return moment_table(p, grid, 0).log_z();
}

Eigen::VectorXd mean_T_from(const MomentTable& table, const MonomialBasis& basis) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) m[static_cast<Eigen::Index>(j)] = table(basis[j]);
  return m;
}

Eigen::MatrixXd second_T_from(const MomentTable& table, const MonomialBasis& basis) {
  const auto m = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd s(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a; b < m; ++b) {
      s(a, b) = s(b, a) = table(basis[a] + basis[b]);
    }
  }
  return s;
}

Moments moments(const ParamVector& p, const QuadratureGrid& grid) {
  const MomentTable table = moment_table(p, grid, 2 * p.d());
  return {mean_T_from(table, p.basis()), second_T_from(table, p.basis())};
}

// --- gate and grid selection -------------------------------------------------------

GateReport grid_gate(const ParamVector& p, const QuadratureGrid& grid, double tol) {
  GateReport r;
  r.value = log_partition(p, grid);
  r.value_doubled = log_partition(p, doubled(grid));
  r.converged = std::abs(r.value - r.value_doubled) < tol;
  return r;
}

double envelope_radius(const ParamVector& p) {
  const MonomialBasis& basis = p.basis();
  const int d = p.d();
  auto excess = [&](double r) {
    double s = -std::pow(r, d + 1);
    for (std::size_t j : p.active()) s += std::abs(p.theta()[j]) * std::pow(r, basis[j].total());
    return s;
  };
  double hi = 1.0;
  while (excess(hi) > -60.0) hi *= 2.0;
  if (hi == 1.0) return 1.0;
  double lo = hi / 2.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > -60.0 ? lo : hi) = mid;
  }
  return hi;
}

namespace {

struct RadiusChoice {
  double radius;
  double tail;
};

RadiusChoice select_radius(const ParamVector& p, const GridRequest& req, std::size_t ppa, double width) {
  const double r0 = std::min(tail_radius(p.n(), p.d(), p.B()), envelope_radius(p));
  const QuadratureGrid probe = build_grid(p.n(), r0, ppa, req.refine_near, width);
  std::vector<double> candidates;
  for (double b : probe.breakpoints()) {
    if (b > 0.0 && b < r0) candidates.push_back(b);
  }
  std::sort(candidates.begin(), candidates.end());
  if (candidates.empty()) return {r0, 0.0};
  const auto tails = nodewise_expectation(p, probe, candidates.size(), [&](std::span<const double> x, std::span<double> out) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    for (std::size_t c = 0; c < candidates.size(); ++c) out[c] = m > candidates[c] ? 1.0 : 0.0;
  });
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (tails.value[static_cast<Eigen::Index>(c)] < kTailMassTol) return {candidates[c], tails.value[c]};
  }
  return {r0, 0.0};
}

std::size_t pow_size(std::size_t base, std::size_t e) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace

ResolvedGrid resolve_grid(const ParamVector& p, const GridRequest& req) {
  ResolvedGrid out;
  const double width = req.refine_width.value_or(1.0);
  std::size_t ppa = req.points_per_axis.value_or(kDefaultPointsPerAxis);
  double radius = 0.0;
  if (req.radius) {
    radius = *req.radius;
  } else {
    const auto choice = select_radius(p, req, ppa, width);
    radius = choice.radius;
    out.tail_mass = choice.tail;
  }
  for (;;) {
    out.grid = build_grid(p.n(), radius, ppa, req.refine_near, width);
    out.gate = grid_gate(p, out.grid);
    if (out.gate.converged) return out;
    std::ostringstream msg;
    msg.precision(17);
    msg << "grid gate failed at R=" << radius << ", points_per_axis=" << ppa << ": log Z " << out.gate.value
        << " vs " << out.gate.value_doubled << " after doubling";
    if (req.points_per_axis || pow_size(4 * ppa, p.n()) > kMaxGridNodes) throw GridNotConverged(msg.str());
    out.notes.push_back(msg.str() + "; doubling points_per_axis");
    ppa *= 2;
  }
}

// --- appendix bounds -------------------------------------------------------------

double tail_radius(std::size_t n, int d, double B) {
  const double M = binomial(static_cast<int>(n) + d, d);
  return std::ldexp(1.0, d + 3) * static_cast<double>(n) * B * M;
}

double moment_bound(int l, std::size_t n, int d, double B) {
  if (l < 1) throw std::invalid_argument("moment_bound: l must be >= 1");
  const double M = binomial(static_cast<int>(n) + d, d);
  const double a = 2.0 * std::pow(static_cast<double>(l), l);
  const double b = std::pow(B * M, l) * std::ldexp(1.0, l * (d + 1) + 1);
  return std::max(a, b);
}

}  // namespace polyscore
