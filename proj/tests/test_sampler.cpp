#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "polyscore/errors.hpp"
#include "polyscore/rng.hpp"
#include "polyscore/sampler.hpp"

using namespace polyscore;

namespace {

ParamVector family(std::size_t n, int d, std::vector<double> theta, double B = 1.0) {
  Eigen::VectorXd t = Eigen::Map<Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  return ParamVector(make_basis(n, d), t, B);
}

// CDF of coordinate i of a separable member from composite Gauss–Legendre on
// the 1-D marginal.
struct MarginalCdf {
  std::vector<double> edges, cum;
  std::vector<double> coeff;
  int d;
  double mass = 0.0;
  GaussRule rule = gauss_legendre(20);

  double logg(double z) const {
    double s = -std::pow(z, d + 1);
    for (int k = 1; k <= d; ++k) s += coeff[k] * std::pow(z, k);
    return s;
  }
  double segment(double a, double b) const {
    double acc = 0.0;
    for (int k = 0; k < 20; ++k) {
      const double z = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[k];
      acc += 0.5 * (b - a) * rule.weights[k] * std::exp(logg(z));
    }
    return acc;
  }
  MarginalCdf(const ParamVector& p, std::size_t i) : coeff(p.d() + 1, 0.0), d(p.d()) {
    for (std::size_t j : p.active()) coeff[p.basis().exponent(j, i)] += p.theta()[j];
    for (int k = 0; k <= 2000; ++k) edges.push_back(-8.0 + 16.0 * k / 2000);
    cum.push_back(0.0);
    for (std::size_t k = 1; k < edges.size(); ++k) cum.push_back(cum.back() + segment(edges[k - 1], edges[k]));
    mass = cum.back();
  }
  double operator()(double x) const {
    if (x <= edges.front()) return 0.0;
    if (x >= edges.back()) return 1.0;
    const auto k = static_cast<std::size_t>((x - edges.front()) / (edges[1] - edges[0]));
    return (cum[k] + segment(edges[k], x)) / mass;
  }
};

}  // namespace

TEST_CASE("philox known answers") {
  using A = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});

  RandomStream a(42, 0), b(42, 0), c(42, 1);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    differs = differs || u != c.uniform();
  }
  CHECK(differs);
}

TEST_CASE("exact sampler on the Gaussian member") {
  const auto p = family(1, 1, {0.0});
  const auto s = sample_exact_separable(p, 100000, 7);
  CHECK(s.N == 100000);
  const double mean = s.data.col(0).mean();
  CHECK(std::abs(mean) <= 4.0 * std::sqrt(0.5 / 1e5));
  const double var = (s.data.col(0).array() - mean).square().mean();
  CHECK(std::abs(var - 0.5) <= 4.0 * std::sqrt(2.0 * 0.25 / 1e5));

  const auto again = sample_exact_separable(p, 100000, 7);
  CHECK(again.data == s.data);
  CHECK_THROWS_AS(sample_exact_separable(family(2, 3, {0, 0, 0, 0.5, 0, 0, 0, 0, 0}), 10, 1),
                  std::invalid_argument);
}

TEST_CASE("exact sampler passes KS against the quadrature CDF") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double critical = 1.628 / std::sqrt(1e4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + trial % 2;
    auto basis = make_basis(n, 3);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis->size()));
    for (std::size_t j = 0; j < basis->size(); ++j) {
      int support = 0;
      for (std::size_t i = 0; i < n; ++i) support += (*basis)[j][i] > 0;
      if (support == 1) theta[static_cast<Eigen::Index>(j)] = u(rng);
    }
    const ParamVector p(basis, theta, 1.0);
    const auto s = sample_exact_separable(p, 10000, 1 + trial);
    for (std::size_t i = 0; i < n; ++i) {
      const MarginalCdf cdf(p, i);
      std::vector<double> col(s.N);
      for (std::size_t k = 0; k < s.N; ++k) col[k] = s.data(k, i);
      CHECK(ks_statistic(col, cdf) < critical);
    }
  }
}

TEST_CASE("diagnostics") {
  const auto p = family(1, 1, {0.0});
  const auto grid = resolve_grid(p).grid;
  const auto s = sample_exact_separable(p, 20000, 3);
  CHECK(diagnostics(s, p, grid).max_z < 4.0);
  const auto shifted = family(1, 1, {1.0});
  CHECK(diagnostics(s, shifted, resolve_grid(shifted).grid).max_z > 20.0);
  SampleSet empty;
  empty.n = 1;
  CHECK_THROWS_AS(diagnostics(empty, p, grid), std::invalid_argument);
}

TEST_CASE("MALA matches quadrature moments") {
  const auto p = family(2, 3, std::vector<double>(9, 0.0));
  McmcConfig cfg;
  const auto s = sample_mala(p, 20000, cfg, 11);
  const auto grid = resolve_grid(p).grid;
  const auto table = moment_table(p, grid, 4);
  const double ex2 = table(MultiIndex({2, 0}));
  const double var_x2 = table(MultiIndex({4, 0})) - ex2 * ex2;
  std::vector<double> x1sq(s.N), x1(s.N), x2(s.N);
  for (std::size_t k = 0; k < s.N; ++k) {
    x1sq[k] = s.data(k, 0) * s.data(k, 0);
    x1[k] = s.data(k, 0);
    x2[k] = s.data(k, 1);
  }
  double m2 = 0.0;
  for (double v : x1sq) m2 += v;
  m2 /= static_cast<double>(s.N);
  const double se = std::sqrt(var_x2 / effective_sample_size(x1sq));
  CHECK(std::abs(m2 - ex2) <= 3.0 * se);
  for (const auto* col : {&x1, &x2}) {
    double m = 0.0;
    for (double v : *col) m += v;
    m /= static_cast<double>(s.N);
    CHECK(std::abs(m) <= 3.0 * std::sqrt(table(MultiIndex({2, 0})) / effective_sample_size(*col)));
  }
  CHECK(s.provenance.acceptance_rate > 0.4);
  CHECK(s.provenance.acceptance_rate < 0.75);
  CHECK(s.provenance.thinning >= 1);
  CHECK(autocorrelation(x1, 1) < 0.6);

  const auto again = sample_mala(p, 20000, cfg, 11);
  CHECK(again.data == s.data);
}

TEST_CASE("MALA stationary variance on the Gaussian member") {
  const auto p = family(1, 1, {0.0});
  McmcConfig cfg;
  cfg.chains = 2;
  const auto s = sample_mala(p, 20000, cfg, 5);
  std::vector<double> sq(s.N);
  double mean = 0.0;
  for (std::size_t k = 0; k < s.N; ++k) {
    sq[k] = s.data(k, 0) * s.data(k, 0);
    mean += sq[k];
  }
  mean /= static_cast<double>(s.N);
  // Var(x^2) = 2 sigma^4 = 0.5 for N(0, 1/2).
  CHECK(std::abs(mean - 0.5) <= 3.0 * std::sqrt(0.5 / effective_sample_size(sq)));
}

TEST_CASE("sample file round trip") {
  const auto p = family(2, 1, {0.3, -0.2});
  const auto s = sample_exact_separable(p, 50, 99);
  const std::string path = "test_sampler_roundtrip.txt";
  write_samples(path, s);
  const auto r = read_samples(path);
  CHECK(r.n == 2);
  CHECK(r.N == 50);
  CHECK(r.seed == 99);
  CHECK(r.data == s.data);
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_samples("does-not-exist.txt"), IoError);
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("polyscore-samples v1 n=1 N=2 seed=0\n1.0\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_samples(path), ParseError);
  std::remove(path.c_str());
}
