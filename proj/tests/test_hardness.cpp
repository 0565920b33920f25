#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "polyscore/errors.hpp"
#include "polyscore/hardness.hpp"

using namespace polyscore;

namespace {

const std::string kData = POLYSCORE_TESTDATA;

// Product form of a clause polynomial, straight from the literals.
double clause_direct(const Clause& c, std::span<const double> x) {
  double v = 1.0;
  for (int l : c) {
    const double xi = x[static_cast<std::size_t>(std::abs(l) - 1)];
    const double f = l > 0 ? xi - 1.0 : xi + 1.0;
    v *= f * f;
  }
  return v;
}

double cube_direct(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += (1 - v * v) * (1 - v * v);
  return s;
}

MultiIndex mi(std::vector<int> d) { return MultiIndex(std::move(d)); }

}  // namespace

TEST_CASE("DIMACS parsing") {
  const auto f = parse_dimacs("c a comment\np cnf 3 1\n1 2 -3 0\n");
  CHECK(f.n == 3);
  REQUIRE(f.m() == 1);
  CHECK(f.clauses[0] == Clause{1, 2, -3});
  CHECK(parse_dimacs(to_dimacs(f)).clauses == f.clauses);
  // Clauses may span lines.
  CHECK(parse_dimacs("p cnf 4 2\n1 2\n3 0 -4 -1 2 0\n").m() == 2);

  CHECK_THROWS_AS(parse_dimacs("p cnf 3 1\n1 1 2 0\n"), ParseError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2 1\n1 -2 0\n"), ParseError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 3 1\n1 2 4 0\n"), ParseError);
  CHECK_THROWS_AS(parse_dimacs("1 2 3 0\n"), ParseError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 3 2\n1 2 3 0\n"), ParseError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 3 1\n1 2 x 0\n"), ParseError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 3 1\n1 2 3\n"), ParseError);
  CHECK_THROWS_AS(read_dimacs(kData + "/missing.cnf"), IoError);

  CHECK(satisfying_assignments(read_dimacs(kData + "/unsat3.cnf")).empty());
  const auto uniq = satisfying_assignments(read_dimacs(kData + "/uniq3.cnf"));
  REQUIRE(uniq.size() == 1);
  CHECK(uniq[0] == std::vector<int>{1, 1, 1});
  CHECK(satisfying_assignments(read_dimacs(kData + "/sat3.cnf")) == uniq);
  CHECK(satisfying_assignments(read_dimacs(kData + "/clause1.cnf")).size() == 7);
}

TEST_CASE("clause and hypercube polynomials") {
  const Clause c{1, 2, -3};
  const auto H = clause_poly(c, 3);
  CHECK(H.coeff(mi({2, 2, 2})) == 1.0);
  CHECK(H.coeff(mi({1, 0, 0})) == -2.0);
  CHECK(H.degree() == 6);
  for (const auto& [m, v] : H.terms()) CHECK(std::abs(v) <= 64.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> x{u(rng), u(rng), u(rng)};
    CHECK(H.evaluate(x) == doctest::Approx(clause_direct(c, x)).epsilon(1e-12));
    CHECK(H.evaluate(x) >= -1e-12);
  }
  for (int code = 0; code < 8; ++code) {
    std::vector<double> v{code & 4 ? 1.0 : -1.0, code & 2 ? 1.0 : -1.0, code & 1 ? 1.0 : -1.0};
    const bool sat = v[0] > 0 || v[1] > 0 || v[2] < 0;
    CHECK((H.evaluate(v) == 0.0) == sat);
  }

  const auto G = hypercube_poly(2);
  CHECK(G.evaluate(std::vector<double>{1, -1}) == 0.0);
  CHECK(G.evaluate(std::vector<double>{0, 0}) == 2.0);
  for (const auto& [m, v] : G.terms()) CHECK(std::abs(v) <= 2.0);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x{u(rng), u(rng)};
    CHECK(G.evaluate(x) == doctest::Approx(cube_direct(x)).epsilon(1e-12));
  }
}

TEST_CASE("encoding") {
  const auto f = read_dimacs(kData + "/clause1.cnf");
  const auto a = encode(f, 1.0, 0.0);
  const auto& basis = a.theta.basis();
  CHECK(a.theta.d() == 7);
  CHECK(a.B == 64.0);
  CHECK(a.theta.theta()[static_cast<Eigen::Index>(*basis.index_of(mi({2, 2, 2})))] == -1.0);
  CHECK(a.theta.theta()[static_cast<Eigen::Index>(*basis.index_of(mi({1, 0, 0})))] == 2.0);

  const auto b = encode(f, 0.0, 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(b.theta.theta()[static_cast<Eigen::Index>(*basis.index_of(MultiIndex::unit(3, i, 2)))] == 2.0);
    CHECK(b.theta.theta()[static_cast<Eigen::Index>(*basis.index_of(MultiIndex::unit(3, i, 4)))] == -1.0);
  }

  // log p_theta differs from log h - alpha H - beta G by a constant.
  const auto c = encode(read_dimacs(kData + "/sat3.cnf"), 1.5, 0.7);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2);
  double lo = 1e300, hi = -1e300;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x{u(rng), u(rng), u(rng)};
    double F = 0.0;
    for (const auto& cl : c.formula.clauses) F += 1.5 * clause_direct(cl, x);
    F += 0.7 * cube_direct(x);
    const double diff = log_unnormalized_density(c.theta, x) - (log_base_measure(7, x) - F);
    lo = std::min(lo, diff);
    hi = std::max(hi, diff);
  }
  CHECK(hi - lo <= 1e-8);
  CHECK(lo == doctest::Approx(c.dropped_constant).epsilon(1e-12));

  for (std::uint64_t s = 0; s < 100; ++s) {
    const std::size_t n = 3 + s % 6;
    const auto r = random_cnf(n, 1 + s % (4 * n), s);
    const double alpha = 0.5 + static_cast<double>(s % 7), beta = 0.25 * static_cast<double>(s % 5);
    const auto e = encode(r, alpha, beta);
    CHECK(e.theta.theta().cwiseAbs().maxCoeff() <= 64.0 * static_cast<double>(r.m()) * alpha + 2.0 * beta);
  }
  CHECK_THROWS_AS(encode(f, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("parameter prescriptions") {
  const auto z = default_params(2, 3, parse_param_mode("zeroth"));
  CHECK(z.alpha == 6.0);
  CHECK(z.beta == doctest::Approx(64800.0 * 2 * std::log(26 * std::sqrt(20.0))).epsilon(1e-15));
  const auto s = default_params(2, 3, parse_param_mode("sampling"));
  CHECK(s.alpha == 6.0);
  CHECK(s.beta == doctest::Approx(32400.0 * 2 * std::log(26 * std::sqrt(10.0))).epsilon(1e-15));
  const auto f = default_params(2, 3, parse_param_mode("first"));
  CHECK(f.alpha == 8.0);
  CHECK(f.beta == doctest::Approx(129600.0 * 4 * std::log(408 * std::sqrt(5.0))).epsilon(1e-15));
  const auto sc = default_params(2, 3, parse_param_mode("scaled(0.001)"));
  CHECK(sc.alpha == doctest::Approx(0.001 * z.alpha));
  CHECK(sc.beta == doctest::Approx(0.001 * z.beta));
  CHECK(parse_param_mode("scaled:0.5").factor == 0.5);
  CHECK(to_string(parse_param_mode("scaled(0.25)")) == "scaled(0.25)");
  CHECK_THROWS_AS(parse_param_mode("second"), std::invalid_argument);
  CHECK_THROWS_AS(parse_param_mode("scaled(2)"), std::invalid_argument);
  CHECK_THROWS_AS(default_params(2, 21, parse_param_mode("zeroth")), std::invalid_argument);
}

TEST_CASE("roots of the penalty polynomial") {
  const auto f = read_dimacs(kData + "/clause1.cnf");
  const auto inst = encode(f, 2.0, 3.0);
  const auto F = penalty_poly(f, 2.0, 3.0);
  CHECK(F.evaluate(std::vector<double>{1, 1, 1}) == 0.0);
  CHECK(F.evaluate(std::vector<double>{-1, -1, 1}) == 2.0 * 64.0);
  CHECK(F.evaluate(std::vector<double>{0.5, 0, 0}) >= 3.0 * cube_direct(std::vector<double>{0.5, 0, 0}));
  const auto r = verify_roots(inst, 1);
  CHECK(r.holds);
  CHECK(r.satisfying == 7);
  CHECK(r.vertices == 8);

  for (std::uint64_t s = 0; s < 20; ++s) {
    const std::size_t n = 3 + s % 8;
    const auto g = random_cnf(n, 2 + s % (3 * n), 100 + s);
    const auto rep = verify_roots(encode(g, 1.0, 1.0), s, 200);
    CHECK(rep.holds);
    CHECK(rep.satisfying == satisfying_assignments(g).size());
  }
}

TEST_CASE("partition gap between satisfiable and unsatisfiable formulas") {
  const auto sat = read_dimacs(kData + "/sat3.cnf");
  const auto unsat = read_dimacs(kData + "/unsat3.cnf");
  const auto p = default_params(3, 8, parse_param_mode("zeroth"));
  const auto r = zgap_experiment(sat, unsat, p.alpha, p.beta);
  CHECK(r.separation.holds);
  CHECK(r.gap > r.threshold);
  CHECK(r.threshold == doctest::Approx(6 * std::log(1.16)));
  CHECK(r.sat_is_satisfiable);
  CHECK_FALSE(r.unsat_is_satisfiable);

  const auto same = zgap_experiment(unsat, unsat, 1.0, 10.0);
  CHECK(std::abs(same.gap) <= 1e-8);

  const auto tiny = default_params(3, 8, parse_param_mode("scaled(1e-6)"));
  CHECK_FALSE(zgap_experiment(sat, unsat, tiny.alpha, tiny.beta).separation.holds);
}

TEST_CASE("mean sign recovers the unique solution") {
  const auto f = read_dimacs(kData + "/uniq3.cnf");
  const auto p = default_params(3, 7, parse_param_mode("first"));
  const auto r = mean_sign_experiment(f, p.alpha, p.beta);
  CHECK(r.recovered_matches);
  CHECK(r.recovered == std::vector<int>{1, 1, 1});
  CHECK(r.margin.holds);

  CnfFormula flipped = f;
  for (auto& c : flipped.clauses) {
    for (auto& l : c) l = -l;
  }
  const auto rf = mean_sign_experiment(flipped, p.alpha, p.beta);
  CHECK(rf.recovered == std::vector<int>{-1, -1, -1});
  CHECK(rf.min_margin == doctest::Approx(r.min_margin).epsilon(1e-9));

  CnfFormula two = f;
  two.clauses.pop_back();
  CHECK_THROWS_AS(mean_sign_experiment(two, p.alpha, p.beta), std::invalid_argument);
}

TEST_CASE("orthant mass") {
  const auto one = read_dimacs(kData + "/clause1.cnf");
  const auto p = default_params(3, 1, parse_param_mode("sampling"));
  const auto r = orthant_mass(one, p.alpha, p.beta);
  REQUIRE(r.half_mass.has_value());
  CHECK(r.half_mass->holds);
  CHECK(r.doubled_difference < 1e-8);

  CnfFormula empty;
  empty.n = 3;
  const auto flat = orthant_mass(empty, 0.0, 0.0);
  for (double m : flat.orthant_masses) CHECK(m == doctest::Approx(0.125).epsilon(1e-9));

  const auto unsat = orthant_mass(read_dimacs(kData + "/unsat3.cnf"), 1.0, 10.0);
  CHECK_FALSE(unsat.half_mass.has_value());
  CHECK(unsat.mass_on_sat == 0.0);
}

TEST_CASE("off-hypercube mass shrinks as beta grows") {
  CnfFormula empty;
  empty.n = 2;
  double previous = 1.0, previous_err = 0.0;
  for (double beta = 1.0; beta <= 1024.0; beta *= 4.0) {
    const auto r = off_hypercube_mass(encode(empty, 1.0, beta));
    CHECK(r.mass <= previous + r.doubled_difference + previous_err);
    previous = r.mass;
    previous_err = r.doubled_difference;
  }
  CHECK(previous < 1e-3);
}
