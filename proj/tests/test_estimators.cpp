#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "polyscore/errors.hpp"
#include "polyscore/estimators.hpp"

using namespace polyscore;

namespace {

SampleSet from_values(std::size_t n, const std::vector<double>& v) {
  SampleSet s;
  s.n = n;
  s.N = v.size() / n;
  s.data = Eigen::Map<const SampleMatrix>(v.data(), static_cast<Eigen::Index>(s.N), static_cast<Eigen::Index>(n));
  return s;
}

ParamVector random_member(std::mt19937_64& rng, const BasisPtr& basis, double B) {
  std::uniform_real_distribution<double> u(-B, B);
  Eigen::VectorXd t(static_cast<Eigen::Index>(basis->size()));
  for (auto& v : t) v = u(rng);
  return ParamVector(basis, t, B);
}

SampleSet random_samples(std::mt19937_64& rng, std::size_t n, std::size_t N) {
  std::normal_distribution<double> g(0.0, 0.8);
  std::vector<double> v(n * N);
  for (auto& x : v) x = g(rng);
  return from_values(n, v);
}

// Minimizer of a quadratic recovered purely from loss evaluations.
Eigen::VectorXd quadratic_minimizer(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::Index m) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
  const double f0 = f(zero);
  Eigen::VectorXd g(m);
  Eigen::MatrixXd H(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const Eigen::VectorXd ea = Eigen::VectorXd::Unit(m, a);
    const double fp = f(ea), fm = f(-ea);
    g[a] = 0.5 * (fp - fm);
    H(a, a) = fp + fm - 2 * f0;
  }
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a + 1; b < m; ++b) {
      const Eigen::VectorXd eab = Eigen::VectorXd::Unit(m, a) + Eigen::VectorXd::Unit(m, b);
      const double fab = f(eab);
      H(a, b) = H(b, a) = fab - f0 - g[a] - g[b] - 0.5 * H(a, a) - 0.5 * H(b, b);
    }
  }
  return -H.ldlt().solve(g);
}

}  // namespace

TEST_CASE("score matching closed form examples") {
  auto b11 = make_basis(1, 1);
  CHECK(std::abs(fit_score_matching(from_values(1, {-0.7, 0.7}), b11).theta_hat[0]) < 1e-15);
  CHECK(fit_score_matching(from_values(1, {0.5, 1.0, 1.5}), b11).theta_hat[0] == doctest::Approx(2.0));

  const ParamVector star(b11, Eigen::VectorXd::Ones(1), 1.0);
  const auto s = sample_exact_separable(star, 100000, 21);
  const auto fit = fit_score_matching(s, b11);
  CHECK(std::abs(fit.theta_hat[0] - 1.0) <= 0.05);
  CHECK(fit.theta_hat[0] == doctest::Approx(2.0 * s.data.col(0).mean()).epsilon(1e-12));
  CHECK(fit.gram_condition >= 1.0);
  CHECK_THROWS_AS(fit_score_matching(from_values(1, {}), b11), std::invalid_argument);
}

TEST_CASE("sm loss") {
  auto b11 = make_basis(1, 1);
  CHECK(sm_loss(ParamVector::zero(b11), from_values(1, {0.0})) == doctest::Approx(-2.0));

  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 2;
    auto basis = make_basis(n, 3);
    const auto s = random_samples(rng, n, 200);
    const auto fit = fit_score_matching(s, basis);
    const auto hat = ParamVector::unconstrained(basis, fit.theta_hat);
    const double best = sm_loss(hat, s);
    CHECK(best == doctest::Approx(fit.loss).epsilon(1e-9));
    for (int probe = 0; probe < 20; ++probe) {
      const auto q = random_member(rng, basis, 3.0);
      CHECK(best <= sm_loss(q, s) + 1e-9);
    }
    // Normal equations.
    const auto st = sm_statistics(s, *basis);
    CHECK((st.G * fit.theta_hat + st.b).norm() <= 1e-8 * (1 + fit.theta_hat.norm()));
    // Agreement with a minimizer built only from loss evaluations.
    const auto m = static_cast<Eigen::Index>(basis->size());
    const auto generic = quadratic_minimizer(
        [&](const Eigen::VectorXd& t) { return sm_loss(ParamVector::unconstrained(basis, t), s); }, m);
    CHECK((generic - fit.theta_hat).norm() <= 1e-6 * (1 + fit.theta_hat.norm()));
    // Exactly quadratic along a segment.
    const Eigen::VectorXd t0 = random_member(rng, basis, 1.0).theta();
    const Eigen::VectorXd dir = random_member(rng, basis, 1.0).theta();
    auto along = [&](double t) { return sm_loss(ParamVector::unconstrained(basis, t0 + t * dir), s); };
    const double l0 = along(0), l1 = along(1), lm = along(-1);
    const double a = 0.5 * (l1 + lm) - l0, bcoef = 0.5 * (l1 - lm);
    for (double t : {0.3, 2.0, -1.7}) {
      CHECK(std::abs(along(t) - (l0 + bcoef * t + a * t * t)) <= 1e-9 * std::max(1.0, std::abs(along(t))));
    }
  }
}

TEST_CASE("singular gram matrix") {
  auto b13 = make_basis(1, 3);
  // All samples at the origin: only the x direction has a gradient.
  const auto r = fit_score_matching(from_values(1, {0.0, 0.0}), b13);
  CHECK_FALSE(r.notes.empty());
  CHECK(r.notes[0].find("x^(2)") != std::string::npos);
}

TEST_CASE("mle loss and gradient") {
  auto b11 = make_basis(1, 1);
  const auto p0 = ParamVector::zero(b11);
  const auto grid = resolve_grid(p0).grid;
  const auto l = mle_loss_and_grad(p0, from_values(1, {0.0}), grid);
  CHECK(l.loss == doctest::Approx(-0.5 * std::log(std::numbers::pi)).epsilon(1e-10));

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 1 + trial % 2;
    auto basis = make_basis(n, 3);
    const auto p = random_member(rng, basis, 1.0);
    const auto g = resolve_grid(p).grid;
    const auto s = random_samples(rng, n, 100);
    const auto lg = mle_loss_and_grad(p, s, g);
    for (Eigen::Index j = 0; j < p.theta().size(); ++j) {
      const double h = 1e-5;
      Eigen::VectorXd tp = p.theta(), tm = p.theta();
      tp[j] += h;
      tm[j] -= h;
      const double fd = (mle_loss_and_grad(ParamVector::unconstrained(basis, tp), s, g).loss -
                         mle_loss_and_grad(ParamVector::unconstrained(basis, tm), s, g).loss) /
                        (2 * h);
      CHECK(std::abs(fd - lg.grad[j]) <= 1e-5 * std::max(1.0, std::abs(lg.grad[j])));
    }
    // Concavity along random segments.
    const Eigen::VectorXd dir = 0.2 * random_member(rng, basis, 1.0).theta();
    for (double t : {-1.0, 0.0, 1.0}) {
      const double h = 0.5;
      auto at = [&](double u) {
        return mle_loss_and_grad(ParamVector::unconstrained(basis, p.theta() + u * dir), s, g).loss;
      };
      CHECK(at(t + h) + at(t - h) - 2 * at(t) <= 1e-8);
    }
  }
}

TEST_CASE("mle fit") {
  auto b11 = make_basis(1, 1);
  const ParamVector star(b11, Eigen::VectorXd::Ones(1), 1.0);
  const auto s = sample_exact_separable(star, 100000, 5);
  const auto grid = resolve_grid(star).grid;
  const double tol = 1e-6;
  const auto fit = fit_mle(s, b11, grid, Eigen::VectorXd::Zero(1));
  CHECK(std::abs(fit.theta_hat[0] - 2.0 * s.data.col(0).mean()) <= 10 * tol);
  const auto fit2 = fit_mle(s, b11, grid, Eigen::VectorXd::Constant(1, -0.8));
  CHECK(std::abs(fit2.theta_hat[0] - fit.theta_hat[0]) <= 10 * tol);

  std::mt19937_64 rng(7);
  auto b13 = make_basis(1, 3);
  const auto p = random_member(rng, b13, 1.0);
  const auto s3 = sample_exact_separable(p, 20000, 9);
  const auto g3 = resolve_grid(p).grid;
  const auto f3 = fit_mle(s3, b13, g3, Eigen::VectorXd::Zero(3));
  const auto f3b = fit_mle(s3, b13, g3, random_member(rng, b13, 1.0).theta());
  CHECK((f3.theta_hat - f3b.theta_hat).cwiseAbs().maxCoeff() <= 1e-3);
  CHECK(f3.grad_norm <= 1e-6);
  // Finite-difference Hessian at the optimum is negative semidefinite.
  const Eigen::Index m = 3;
  Eigen::MatrixXd H(m, m);
  const double h = 1e-3;
  for (Eigen::Index a = 0; a < m; ++a) {
    Eigen::VectorXd tp = f3.theta_hat, tm = f3.theta_hat;
    tp[a] += h;
    tm[a] -= h;
    H.col(a) = (mle_loss_and_grad(ParamVector::unconstrained(b13, tp), s3, g3).grad -
                mle_loss_and_grad(ParamVector::unconstrained(b13, tm), s3, g3).grad) /
               (2 * h);
  }
  H = 0.5 * (H + H.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  CHECK(es.eigenvalues().maxCoeff() <= 1e-6);

  MleOptions capped;
  capped.max_iter = 1;
  capped.tol = 1e-14;
  CHECK_THROWS_AS(fit_mle(s3, b13, g3, Eigen::VectorXd::Zero(3), capped), ConvergenceError);
}

TEST_CASE("population stationarity of the likelihood gradient") {
  auto b11 = make_basis(1, 1);
  const ParamVector star(b11, Eigen::VectorXd::Ones(1), 1.0);
  const auto s = sample_exact_separable(star, 1000000, 77);
  const auto grid = resolve_grid(star).grid;
  CHECK(mle_loss_and_grad(star, s, grid).grad.norm() <= 0.01);
}

TEST_CASE("convergence study") {
  auto b11 = make_basis(1, 1);
  const ParamVector star(b11, Eigen::VectorXd::Ones(1), 1.0);
  CHECK_THROWS_AS(convergence_study(star, {100, 1000}, 0, {Estimator::SM}, 1), std::invalid_argument);
  CHECK_THROWS_AS(convergence_study(star, {1000, 100}, 2, {Estimator::SM}, 1), std::invalid_argument);
  const auto r = convergence_study(star, {100, 1000, 10000}, 10, {Estimator::SM, Estimator::MLE}, 3);
  CHECK(r.rows.size() == 60);
  REQUIRE(r.summaries.size() == 2);
  for (const auto& sum : r.summaries) {
    CHECK(sum.slope <= -0.7);
    CHECK(sum.slope >= -1.3);
  }
  for (double ratio : r.ratio_sm_mle) CHECK(ratio <= 10.0);
  const auto again = convergence_study(star, {100, 1000, 10000}, 10, {Estimator::SM, Estimator::MLE}, 3);
  for (std::size_t i = 0; i < r.rows.size(); ++i) CHECK(again.rows[i].error_sq == r.rows[i].error_sq);
  const auto csv = study_csv(r);
  CHECK(csv.rfind("estimator,n,d,B,N,trial,error_sq,wall_time_s\n", 0) == 0);
  const auto single = convergence_study(star, {100, 1000}, 1, {Estimator::SM}, 3);
  CHECK_FALSE(single.notes.empty());
  CHECK(parse_estimator("MLE") == Estimator::MLE);
  CHECK_THROWS_AS(parse_estimator("ols"), std::invalid_argument);
}
