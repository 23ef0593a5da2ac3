#include <doctest.h>

#include "helpers.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/estimator.hpp"
#include "jobmatch/market_sim.hpp"
#include "jobmatch/optimize.hpp"

#include <cmath>

using namespace jobmatch;

namespace {

BasisSpec small_spec() {
  return BasisSpec({BasisFunction::product(1, 1), BasisFunction::product(1, 2),
                    BasisFunction::product(2, 1)},
                   {true, true, false}, {true, false, true});
}

GroundTruthMarket small_market() {
  const int m = 6;
  RowMatrix X(m, 2), Y(m, 2);
  for (int i = 0; i < m; ++i) {
    X(i, 0) = -1.0 + 2.0 * i / (m - 1);
    X(i, 1) = std::sin(1.7 * i + 0.3);
    Y(i, 0) = -1.0 + 2.0 * ((5 * i) % m) / (m - 1);
    Y(i, 1) = std::cos(1.3 * i + 0.5);
  }
  Theta th = Theta::zeros(3);
  th.A << 0.4, -0.5, 0.0;
  th.Gamma << 0.6, 0.0, 0.8;
  th.sigma1 = 0.3;
  th.sigma2 = 0.2;
  th.t = 1.0;
  th.s2 = 0.04;
  const Vector mass = Vector::Constant(m, 1.0 / m);
  return build_market(X, mass, Y, mass, th, small_spec());
}

}  // namespace

TEST_CASE("bfgs minimizes the Rosenbrock function") {
  auto rosen = [](const Vector& x, Vector& g) {
    g.resize(2);
    g(0) = -400 * x(0) * (x(1) - x(0) * x(0)) - 2 * (1 - x(0));
    g(1) = 200 * (x(1) - x(0) * x(0));
    return 100 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1 - x(0), 2);
  };
  Vector x0(2);
  x0 << -1.2, 1.0;
  const auto r = minimize_bfgs(rosen, x0, {1e-10, 500});
  CHECK(r.converged);
  CHECK(std::abs(r.x(0) - 1.0) < 1e-8);
  CHECK(std::abs(r.x(1) - 1.0) < 1e-8);
  for (std::size_t k = 1; k < r.history.size(); ++k) {
    CHECK(r.history[k] <= r.history[k - 1] + 1e-12 * std::max(1.0, std::abs(r.history[k - 1])));
  }
}

TEST_CASE("estimation recovers a small market") {
  const auto m = small_market();
  const auto s = draw_sample(m, 3000, 0.0, 17);
  const auto truth = truth_for_sample(m, s);
  const auto r = estimate(s, small_spec());
  REQUIRE(r.convergence.converged);
  CHECK(r.std_error_status == "ok");
  for (int k = 0; k < 3; ++k) {
    INFO("basis " << k);
    CHECK(std::abs(r.phi_hat(k) - truth.phi()(k)) < 4.0 * r.phi_std_errors(k));
  }
  CHECK(std::abs(r.theta_hat.s2 - truth.s2) < 4.0 * r.std_errors(2 * 3 + 3));
  CHECK(r.r_squared > 0.0);
  CHECK(r.r_squared < 1.0);

  SUBCASE("concentrated estimation reaches the same optimum") {
    const auto c = estimate_concentrated(s, small_spec());
    REQUIRE(c.convergence.converged);
    CHECK(std::abs(c.loglik.total - r.loglik.total) < 1e-6);
    CHECK((c.phi_hat - r.phi_hat).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("transfer masking limits") {
  const auto m = small_market();
  const auto s = draw_sample(m, 600, 0.0, 5);
  EstimatorOptions opt;
  opt.compute_std_errors = false;
  const auto full = estimate(s, small_spec(), opt);
  const auto same = estimate(mask_transfers(s, 0.0, 99), small_spec(), opt);
  CHECK(same.theta_hat.to_vector() == full.theta_hat.to_vector());
  CHECK(same.loglik.total == full.loglik.total);

  const auto none = estimate(mask_transfers(s, 1.0, 99), small_spec(), opt);
  CHECK(none.method == EstimationMethod::MatchingOnly);
  CHECK_FALSE(none.split_identified);
  CHECK(none.n_observed == 0);
  for (int k = 0; k < 3; ++k) CHECK(none.phi_identified[k]);
  CHECK(std::isnan(none.theta_hat.sigma1));
  CHECK(none.loglik.logL2 == 0.0);
}

TEST_CASE("separable bases are unidentified without transfers") {
  const auto s = testing::random_sample(40, 2, 2, 3, 0.3, 1.0);
  const BasisSpec spec({BasisFunction::product(1, 1), BasisFunction::product(0, 1)},
                       {true, true}, {true, false});
  EstimatorOptions opt;
  opt.compute_std_errors = false;
  const auto r = estimate(s, spec, opt);
  CHECK(r.phi_identified[0]);
  CHECK_FALSE(r.phi_identified[1]);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("estimation input checks") {
  const auto s = testing::random_sample(6, 2, 2, 1);
  CHECK_THROWS_AS(estimate(s, testing::four_bases()), ConfigError);
}

TEST_CASE("likelihood ratio test") {
  const auto lr = likelihood_ratio_test(-100.0, -100.0 - 3.841458820694124 / 2.0, 1);
  CHECK(lr.statistic == doctest::Approx(3.841458820694124));
  CHECK(lr.p_value == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(likelihood_ratio_test(-10.0, -12.0, 2).p_value == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("hessian standard errors of a Gaussian log-likelihood") {
  // logL = -(x0^2 / (2 * 4) + x1^2 / (2 * 0.25)), so the standard errors are 2 and 0.5.
  auto grad = [](const Vector& x) {
    Vector g(2);
    g << -x(0) / 4.0, -x(1) / 0.25;
    return g;
  };
  const auto se = hessian_standard_errors(grad, Vector::Zero(2), {true, true});
  REQUIRE(se.ok);
  CHECK(se.std_errors(0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(se.std_errors(1) == doctest::Approx(0.5).epsilon(1e-8));
}
