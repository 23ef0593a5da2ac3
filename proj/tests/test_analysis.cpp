#include <doctest.h>

#include "jobmatch/analysis.hpp"
#include "jobmatch/error.hpp"
#include "jobmatch/market_sim.hpp"

#include <cmath>
#include <random>

using namespace jobmatch;

namespace {

// Mean absolute difference over all pairs, halved and divided by the mean.
double pairwise_gini(const Vector& x, const Vector& w) {
  const double W = w.sum();
  double mad = 0.0, mean = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    mean += w(i) * x(i) / W;
    for (Eigen::Index j = 0; j < x.size(); ++j) mad += w(i) * w(j) * std::abs(x(i) - x(j));
  }
  return mad / (W * W) / (2.0 * mean);
}

// Risk in firm column 0, one worker covariate.
struct RiskMarket {
  BasisSpec spec;
  GroundTruthMarket market;
};

RiskMarket risk_market(double sigma1) {
  BasisSpec spec({BasisFunction::product(1, 1), BasisFunction::product(0, 1),
                  BasisFunction::product(1, 0)},
                 {true, true, false}, {true, false, true});
  Theta th = Theta::zeros(3);
  th.A << 0.1, -0.5, 0.0;
  th.Gamma << 0.2, 0.0, 0.8;
  th.sigma1 = sigma1;
  th.sigma2 = 0.2;
  th.t = 1.0;
  th.s2 = 0.04;
  const RowMatrix Y = linspace_grid(8, 0, 2);
  Vector g(8);
  for (int j = 0; j < 8; ++j) g(j) = std::exp(-1.5 * Y(j, 0));
  g /= g.sum();
  auto m = build_market(linspace_grid(8, -1, 1), Vector::Constant(8, 1.0 / 8), Y, g, th, spec);
  return {spec, std::move(m)};
}

}  // namespace

TEST_CASE("vsl unit arithmetic") {
  const BasisSpec spec({BasisFunction::product(0, 1)}, {true}, {false});
  Theta th = Theta::zeros(1);
  th.sigma1 = 0.5;
  th.sigma2 = 0.5;
  VslUnits u{0, 50000.0, 1e5};
  CHECK(vsl(th, spec, u) == 0.0);
  th.A << -0.002;
  CHECK(vsl(th, spec, u) == doctest::Approx(1e7).epsilon(1e-12));
  th.sigma1 = 1.5;
  CHECK(vsl(th, spec, u) == doctest::Approx(2e7).epsilon(1e-12));
  // Risk is firm column 0; this alpha only involves column 1.
  const BasisSpec no_risk({BasisFunction::product(0, 2)}, {true}, {false});
  CHECK_THROWS_AS(vsl(th, no_risk, u), ConfigError);
}

TEST_CASE("gini coefficient") {
  CHECK(gini(Vector::Constant(5, 3.0)) == doctest::Approx(0.0));
  Vector x(3);
  x << 0.0, 0.0, 1.0;
  CHECK(gini(x) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  Vector a(2), wa(2), b(3);
  a << 1.0, 2.0;
  wa << 2.0, 1.0;
  b << 1.0, 1.0, 2.0;
  CHECK(gini(a, wa) == doctest::Approx(gini(b)).epsilon(1e-14));

  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> ln(0.0, 0.7);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Vector v(40), w(40);
  for (int i = 0; i < 40; ++i) {
    v(i) = ln(rng);
    w(i) = u(rng);
  }
  CHECK(gini(v, w) == doctest::Approx(pairwise_gini(v, w)).epsilon(1e-12));
  CHECK_THROWS(gini(Vector()));
}

TEST_CASE("decomposition identity on the market grid") {
  const auto rm = risk_market(0.3);
  const auto& m = rm.market;
  const auto& th = m.theta_star;
  const Matrix alpha = phi_matrix(th.A, rm.spec, m.grid_workers, m.grid_firms);
  // Conditional log density ln pi(y|x) differs from ln pi(x,y) by a function of x only.
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j + 1 < 8; ++j) {
      const double dy = m.grid_firms(j + 1, 0) - m.grid_firms(j, 0);
      const double lhs = th.sigma() * (alpha(i, j + 1) - alpha(i, j)) / dy;
      const double dlnpi = (std::log(m.pi_star(i, j + 1)) - std::log(m.pi_star(i, j))) / dy;
      const double dw = (m.w_star(i, j + 1) - m.w_star(i, j)) / dy;
      CHECK(lhs == doctest::Approx(th.sigma1 * dlnpi - dw).epsilon(1e-10));
    }
  }
}

TEST_CASE("hedonic regression recovers a noiseless linear wage") {
  RowMatrix X(6, 1), Y(6, 2);
  X << 0, 1, 2, 0, 1, 3;
  Y << 0.1, 1, 0.5, 0, 0.2, 2, 0.9, 1, 0.3, 0, 0.7, 3;
  Transfers W(6);
  for (int i = 0; i < 6; ++i) W[i] = 1.0 + 0.5 * X(i, 0) - 0.25 * Y(i, 0) + 0.1 * Y(i, 1);
  const MatchSample s(X, Y, W);
  HedonicSpec hs{{0}, {0, 1}, true};
  const auto h = hedonic_baseline(s, hs, VslUnits{0, 40000.0, 1e5});
  CHECK(h.risk_coef == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(h.vsl_h == doctest::Approx(-0.25 * 40000.0 * 1e5).epsilon(1e-12));
  CHECK(h.n_rows == 6);
  HedonicSpec no_risk{{0}, {1}, true};
  CHECK_THROWS_AS(hedonic_baseline(s, no_risk, VslUnits{}), ConfigError);
}

TEST_CASE("identity counterfactual changes nothing") {
  const auto rm = risk_market(0.3);
  const auto s = draw_sample(rm.market, 400, 0.0, 8);
  const auto th = truth_for_sample(rm.market, s);
  const auto r = counterfactual(th, rm.spec, s, [](std::span<double>) {}, true);
  CHECK(r.share_changed == 0.0);
  CHECK(r.mean_wage_change == 0.0);
  CHECK(r.gini_after == r.gini_before);
  CHECK(r.pi_after == r.pi_before);
}

TEST_CASE("binding risk cap gives a feasible new equilibrium") {
  const auto rm = risk_market(0.3);
  const auto s = draw_sample(rm.market, 400, 0.0, 8);
  const auto th = truth_for_sample(rm.market, s);
  const auto r = counterfactual(th, rm.spec, s, risk_cap(0, 1.0), true);
  CHECK(r.residual_after <= 1e-10);
  CHECK(r.share_changed > 0.0);
  CHECK(r.share_changed <= 1.0);
  // The after matching keeps both margins of the before matching.
  CHECK((r.pi_after.rowwise().sum() - r.pi_before.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((r.pi_after.colwise().sum() - r.pi_before.colwise().sum()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(r.mean_wage_after > 0.0);
}
