#include <cmath>
#include <functional>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "polyscore/expfam.hpp"

namespace polyscore {

namespace {

using boost::math::quadrature::gauss_kronrod;

double well(double beta, double x) {
  const double s = 1.0 - x * x;
  const double x2 = x * x;
  const double x4 = x2 * x2;
  return x4 * x4 + beta * s * s;
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

// int_a^b x^k exp(-f(x)) dx with the interval split around the well at 1.
double moment_integral(double beta, int k, double a, double b) {
  auto g = [beta, k](double x) { return std::pow(x, k) * std::exp(-well(beta, x)); };
  const double w = std::min(0.5, 20.0 / std::sqrt(beta));
  const double cuts[] = {0.0, 1.0 - w, 1.0, 1.0 + w, 2.0, std::numeric_limits<double>::infinity()};
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < std::size(cuts); ++i) {
    const double lo = std::max(a, cuts[i]);
    const double hi = std::min(b, cuts[i + 1]);
    if (hi > lo) total += integrate(g, lo, hi);
  }
  return total;
}

}  // namespace

std::vector<Check> verify_int_concentration(double beta, double r, int m) {
  std::ostringstream why;
  if (!(beta > 150.0)) why << "beta must exceed 150; ";
  if (!(r > 6.0 / beta && r < 0.04)) why << "r must lie in (6/beta, 0.04); ";
  if (m < 1) why << "m must be a positive integer; ";
  if (m >= 1 && !(beta >= 40.0 / (r * r) * std::log(4.0 * m / r))) why << "beta must be >= 40 r^-2 log(4m/r); ";
  if (!why.str().empty()) throw std::invalid_argument("verify_int_concentration: " + why.str());

  const double whole = moment_integral(beta, 0, 0.0, std::numeric_limits<double>::infinity());
  const double window = moment_integral(beta, 0, 1.0 - r, 1.0 + r);
  const double factor = 1.0 / (1.0 - std::exp(-beta * r * r / 8.0)) + 2.0 * std::exp(-beta * r / 40.0) / r;

  Check general{"int_concentration_factor", whole, factor * window, false};
  general.holds = general.lhs <= general.rhs;
  Check corollary{"int_concentration_m", whole, (1.0 + 1.0 / m) * window, false};
  corollary.holds = corollary.lhs <= corollary.rhs;
  return {general, corollary};
}

std::vector<Check> verify_1d_moment_bound(double beta) {
  if (!(beta >= 160.0 * std::log(8.0))) {
    throw std::invalid_argument("verify_1d_moment_bound: beta must be >= 160 log 8");
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double z = moment_integral(beta, 0, 0.0, inf);
  std::vector<Check> out;
  for (int k = 1; k <= 8; ++k) {
    Check c{"moment_k" + std::to_string(k), moment_integral(beta, k, 0.0, inf), std::ldexp(z, k), false};
    c.holds = c.lhs <= c.rhs;
    out.push_back(c);
  }
  return out;
}

}  // namespace polyscore
