#pragma once

#include <cstddef>
#include <vector>

namespace polyscore {

/// Gauss–Legendre rule of the given order on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gauss_legendre(int order);

struct Panel {
  double a = 0.0;
  double b = 0.0;
  int order = 0;
};

/// Tensor-product composite Gauss–Legendre rule on [-R, R]^n. Every axis
/// uses the same one-dimensional rule.
struct QuadratureGrid {
  std::size_t n = 1;
  double radius = 0.0;
  std::vector<Panel> panels;
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> refine_near;
  double refine_width = 0.0;

  std::size_t points_per_axis() const { return nodes.size(); }
  std::size_t total_nodes() const;
  std::vector<double> breakpoints() const;
};

inline constexpr int kPanelOrder = 10;
inline constexpr std::size_t kMaxGridDim = 3;

/// Panel width used around refinement abscissae for a density whose wells
/// have curvature of order beta.
double refine_width_for_beta(double beta);

/// Without refinement: ppa / kPanelOrder equal panels (one panel when
/// ppa < kPanelOrder). With refinement: nine panels of width `refine_width`
/// centred on each listed abscissa, and the remaining nodes spread over the
/// gaps in proportion to their length. Throws std::invalid_argument for
/// n > 3, R <= 0, or too few points to cover the refinement.
QuadratureGrid build_grid(std::size_t n, double R, std::size_t points_per_axis,
                          const std::vector<double>& refine_near = {}, double refine_width = 1.0);

/// Same panels with every panel order doubled; used by the convergence gate.
QuadratureGrid doubled(const QuadratureGrid& grid);

}  // namespace polyscore
