#include <doctest.h>

#include "jobmatch/error.hpp"
#include "jobmatch/market_sim.hpp"

#include <cmath>

using namespace jobmatch;

namespace {

GroundTruthMarket four_by_four(double s2) {
  const BasisSpec spec({BasisFunction::product(1, 1)}, {true}, {true});
  Theta th = Theta::zeros(1);
  th.A << 0.5;
  th.Gamma << 1.0;
  th.sigma1 = 0.4;
  th.sigma2 = 0.3;
  th.t = 2.0;
  th.s2 = s2;
  Vector p(4), q(4);
  p << 0.1, 0.2, 0.3, 0.4;
  q << 0.25, 0.25, 0.25, 0.25;
  return build_market(linspace_grid(4, -1, 1), p, linspace_grid(4, 0, 3), q, th, spec);
}

}  // namespace

TEST_CASE("market equilibrium has the grid masses as margins") {
  const auto m = four_by_four(0.04);
  CHECK((m.pi_star.rowwise().sum() - m.worker_masses).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((m.pi_star.colwise().sum().transpose() - m.firm_masses).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(m.pots.a(0) == 0.0);
}

TEST_CASE("cell frequencies follow pi_star") {
  const auto m = four_by_four(0.04);
  const int n = 200000;
  const auto s = draw_sample(m, n, 0.0, 123);
  Matrix counts = Matrix::Zero(4, 4);
  for (int r = 0; r < n; ++r) {
    const int i = static_cast<int>(std::lround((s.worker(r)[0] + 1.0) * 1.5));
    const int j = static_cast<int>(std::lround(s.firm(r)[0]));
    counts(i, j) += 1.0;
  }
  // Each count is binomial(n, pi_ij); 5 standard deviations per cell.
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double p = m.pi_star(i, j);
      CHECK(std::abs(counts(i, j) - n * p) < 5.0 * std::sqrt(n * p * (1 - p)));
    }
  }
}

TEST_CASE("noiseless draws reproduce the equilibrium transfers") {
  const auto m = four_by_four(0.0);
  const auto s = draw_sample(m, 50, 0.0, 4);
  for (int r = 0; r < s.n(); ++r) {
    const int i = static_cast<int>(std::lround((s.worker(r)[0] + 1.0) * 1.5));
    const int j = static_cast<int>(std::lround(s.firm(r)[0]));
    CHECK(*s.transfers()[r] == m.w_star(i, j));
  }
}

TEST_CASE("draws are deterministic in the seed") {
  const auto m = four_by_four(0.04);
  const auto a = draw_sample(m, 100, 0.3, 9);
  const auto b = draw_sample(m, 100, 0.3, 9);
  const auto c = draw_sample(m, 100, 0.3, 10);
  CHECK(a.workers() == b.workers());
  CHECK(a.firms() == b.firms());
  CHECK(a.transfers() == b.transfers());
  CHECK(a.transfers() != c.transfers());
}

TEST_CASE("missing transfers are dropped at the requested rate") {
  const auto m = four_by_four(0.04);
  const int n = 20000;
  const auto s = draw_sample(m, n, 0.25, 77);
  const double missing = n - s.n_observed();
  CHECK(std::abs(missing - 0.25 * n) < 5.0 * std::sqrt(n * 0.25 * 0.75));
  CHECK(draw_sample(m, 30, 1.0, 1).n_observed() == 0);
  const auto masked = mask_transfers(draw_sample(m, 30, 0.0, 1), 0.0, 2);
  CHECK(masked.n_observed() == 30);
}

TEST_CASE("truth in the sample normalization") {
  const auto m = four_by_four(0.04);
  const auto s = draw_sample(m, 20, 0.0, 3);
  const int i0 = static_cast<int>(std::lround((s.worker(0)[0] + 1.0) * 1.5));
  const auto th = truth_for_sample(m, s);
  CHECK(th.t == doctest::Approx(2.0 + 0.7 * m.pots.a(i0)).epsilon(1e-15));
  CHECK(th.phi() == m.theta_star.phi());
}

TEST_CASE("market input checks") {
  const BasisSpec spec({BasisFunction::product(1, 1)}, {true}, {true});
  Theta th = Theta::zeros(1);
  th.sigma1 = th.sigma2 = 0.5;
  const Vector u3 = Vector::Constant(3, 1.0 / 3);
  CHECK_THROWS_AS(build_market(linspace_grid(3, 0, 1), u3 * 2.0, linspace_grid(3, 0, 1), u3, th, spec),
                  ConfigError);
  RowMatrix dup = linspace_grid(3, 0, 1);
  dup(2, 0) = dup(1, 0);
  CHECK_THROWS_AS(build_market(dup, u3, linspace_grid(3, 0, 1), u3, th, spec), ConfigError);
  const auto m = build_market(linspace_grid(3, 0, 1), u3, linspace_grid(3, 0, 1), u3, th, spec);
  CHECK_THROWS_AS(draw_sample(m, 0, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(draw_sample(m, 5, 1.5, 1), ConfigError);
}
