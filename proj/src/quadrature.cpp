#include "polyscore/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace polyscore {

GaussRule gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be positive");
  GaussRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  // Newton iteration on P_order from the usual cosine initial guesses.
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

std::size_t QuadratureGrid::total_nodes() const {
  std::size_t t = 1;
  for (std::size_t i = 0; i < n; ++i) t *= nodes.size();
  return t;
}

std::vector<double> QuadratureGrid::breakpoints() const {
  std::vector<double> out;
  for (const auto& p : panels) out.push_back(p.a);
  if (!panels.empty()) out.push_back(panels.back().b);
  return out;
}

double refine_width_for_beta(double beta) {
  if (!(beta > 0.0)) return 1.0;
  return std::min(1.0, 1.0 / std::sqrt(beta));
}

namespace {

void fill_nodes(QuadratureGrid& g) {
  g.nodes.clear();
  g.weights.clear();
  for (const auto& p : g.panels) {
    const GaussRule r = gauss_legendre(p.order);
    const double mid = 0.5 * (p.a + p.b);
    const double half = 0.5 * (p.b - p.a);
    for (int k = 0; k < p.order; ++k) {
      g.nodes.push_back(mid + half * r.nodes[k]);
      g.weights.push_back(half * r.weights[k]);
    }
  }
}

// Splits `total` nodes into `count` panel orders as evenly as possible.
std::vector<int> split_evenly(std::size_t total, std::size_t count) {
  std::vector<int> orders(count, static_cast<int>(total / count));
  for (std::size_t i = 0; i < total % count; ++i) ++orders[i];
  return orders;
}

}  // namespace

QuadratureGrid build_grid(std::size_t n, double R, std::size_t points_per_axis,
                          const std::vector<double>& refine_near, double refine_width) {
  if (n == 0 || n > kMaxGridDim) {
    throw std::invalid_argument("quadrature grids support 1 <= n <= 3 (got n=" + std::to_string(n) + ")");
  }
  if (!(R > 0.0) || !std::isfinite(R)) throw std::invalid_argument("grid radius must be positive");
  if (points_per_axis == 0) throw std::invalid_argument("points_per_axis must be positive");

  QuadratureGrid g;
  g.n = n;
  g.radius = R;
  g.refine_near = refine_near;
  g.refine_width = refine_near.empty() ? 0.0 : refine_width;

  if (refine_near.empty()) {
    const std::size_t count = std::max<std::size_t>(1, points_per_axis / kPanelOrder);
    const auto orders = split_evenly(points_per_axis, count);
    const double h = 2.0 * R / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double a = -R + h * static_cast<double>(i);
      const double b = (i + 1 == count) ? R : a + h;
      g.panels.push_back({a, b, orders[i]});
    }
    fill_nodes(g);
    return g;
  }

  if (!(refine_width > 0.0)) throw std::invalid_argument("refine width must be positive");
  std::vector<double> cuts{-R, R};
  for (double c : refine_near) {
    for (int j = -4; j <= 5; ++j) {
      const double t = c + (j - 0.5) * refine_width;
      if (t > -R && t < R) cuts.push_back(t);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  const double eps = 1e-12 * std::max(1.0, R);
  cuts.erase(std::unique(cuts.begin(), cuts.end(), [&](double a, double b) { return b - a < eps; }),
             cuts.end());

  struct Interval {
    double a, b;
    bool refined;
  };
  std::vector<Interval> intervals;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    const double mid = 0.5 * (a + b);
    bool refined = false;
    for (double c : refine_near) {
      if (std::abs(mid - c) < 4.5 * refine_width) refined = true;
    }
    intervals.push_back({a, b, refined});
  }

  std::size_t refined_nodes = 0;
  double gap_length = 0.0;
  std::size_t gaps = 0;
  for (const auto& iv : intervals) {
    if (iv.refined) {
      refined_nodes += kPanelOrder;
    } else {
      gap_length += iv.b - iv.a;
      ++gaps;
    }
  }
  if (gaps == 0) {
    if (points_per_axis < intervals.size()) throw std::invalid_argument("points_per_axis too small");
    const auto orders = split_evenly(points_per_axis, intervals.size());
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      g.panels.push_back({intervals[i].a, intervals[i].b, orders[i]});
    }
    fill_nodes(g);
    return g;
  }
  const std::size_t needed = refined_nodes + gaps * kPanelOrder;
  if (points_per_axis < needed) {
    throw std::invalid_argument("points_per_axis=" + std::to_string(points_per_axis) +
                                " is too small for the requested refinement (need at least " +
                                std::to_string(needed) + ")");
  }

  // Coarse panels per gap: at least one, the rest by length (largest remainder).
  const std::size_t coarse_nodes = points_per_axis - refined_nodes;
  const std::size_t coarse_panels = std::max(gaps, coarse_nodes / kPanelOrder);
  std::vector<std::size_t> per_gap;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  {
    std::size_t gi = 0;
    for (const auto& iv : intervals) {
      if (iv.refined) continue;
      const double share = static_cast<double>(coarse_panels - gaps) * (iv.b - iv.a) / gap_length;
      const auto whole = static_cast<std::size_t>(std::floor(share));
      per_gap.push_back(1 + whole);
      assigned += 1 + whole;
      remainders.emplace_back(share - static_cast<double>(whole), gi++);
    }
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t i = 0; assigned < coarse_panels && i < remainders.size(); ++i, ++assigned) {
    ++per_gap[remainders[i].second];
  }
  const auto coarse_orders = split_evenly(coarse_nodes, coarse_panels);

  std::size_t gi = 0;
  std::size_t ci = 0;
  for (const auto& iv : intervals) {
    if (iv.refined) {
      g.panels.push_back({iv.a, iv.b, kPanelOrder});
      continue;
    }
    const std::size_t k = per_gap[gi++];
    const double h = (iv.b - iv.a) / static_cast<double>(k);
    for (std::size_t j = 0; j < k; ++j) {
      const double a = iv.a + h * static_cast<double>(j);
      const double b = (j + 1 == k) ? iv.b : a + h;
      g.panels.push_back({a, b, coarse_orders[ci++]});
    }
  }
  fill_nodes(g);
  return g;
}

QuadratureGrid doubled(const QuadratureGrid& grid) {
  QuadratureGrid g = grid;
  for (auto& p : g.panels) p.order *= 2;
  fill_nodes(g);
  return g;
}

}  // namespace polyscore
