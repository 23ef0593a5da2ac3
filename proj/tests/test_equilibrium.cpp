#include <doctest.h>

#include "helpers.hpp"
#include "jobmatch/equilibrium.hpp"
#include "jobmatch/error.hpp"

#include <cmath>
#include <random>

using namespace jobmatch;

namespace {

Matrix uniform_phi(int r, int c, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = u(rng);
  return m;
}

// Plain multiplicative matrix scaling, no logs.
Matrix naive_scaling(const Matrix& phi, const Vector& p, const Vector& q, int sweeps) {
  const Matrix K = phi.array().exp().matrix();
  Vector u = Vector::Ones(phi.rows()), v = Vector::Ones(phi.cols());
  for (int s = 0; s < sweeps; ++s) {
    u = p.array() / (K * v).array();
    v = q.array() / (K.transpose() * u).array();
  }
  return u.asDiagonal() * K * v.asDiagonal();
}

}  // namespace

TEST_CASE("potentials match plain matrix scaling") {
  const Matrix phi = uniform_phi(7, 5, -2.0, 2.0, 3);
  Vector p(7), q(5);
  p << 0.1, 0.2, 0.05, 0.15, 0.2, 0.1, 0.2;
  q << 0.3, 0.1, 0.2, 0.25, 0.15;
  const auto pots = solve_potentials(phi, p, q, SolverOptions{1e-14, 100000});
  const Matrix pi = matching_density(phi, pots).pi();
  const Matrix ref = naive_scaling(phi, p, q, 5000);
  CHECK((pi - ref).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(pots.a(0) == 0.0);
  CHECK(marginal_residual(matching_density(phi, pots), p, q) < 1e-13);
}

TEST_CASE("zero surplus gives the uniform matching") {
  for (int n : {1, 4, 25}) {
    const Vector w = Vector::Constant(n, 1.0 / n);
    const Matrix phi = Matrix::Zero(n, n);
    const auto pots = solve_potentials(phi, w, SolverOptions{1e-14, 100});
    CHECK(pots.a.cwiseAbs().maxCoeff() == 0.0);
    for (int j = 0; j < n; ++j) CHECK(pots.b(j) == doctest::Approx(2.0 * std::log(n)).epsilon(1e-14));
  }
}

TEST_CASE("warm start does not change the solution") {
  const Matrix phi = uniform_phi(30, 30, -3.0, 3.0, 5);
  const Vector w = Vector::Constant(30, 1.0 / 30);
  const auto cold = solve_potentials(phi, w, SolverOptions{1e-13, 100000});
  const Matrix phi2 = phi.array() + 0.01;
  const auto warm = solve_potentials(phi2, w, SolverOptions{1e-13, 100000}, &cold);
  const auto ref = solve_potentials(phi2, w, SolverOptions{1e-13, 100000});
  CHECK((warm.b - ref.b).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(warm.iterations < ref.iterations);
}

TEST_CASE("polish reaches the rounding floor") {
  const Matrix phi = uniform_phi(40, 40, -3.0, 3.0, 8);
  const Vector w = Vector::Constant(40, 1.0 / 40);
  const auto loose = solve_potentials(phi, w, SolverOptions{1e-8, 100000, false});
  const auto polished = solve_potentials(phi, w, SolverOptions{1e-8, 100000, true});
  CHECK(loose.residual <= 1e-8);
  CHECK(polished.residual < 1e-15);
  CHECK(polished.iterations > loose.iterations);
}

TEST_CASE("solver input errors") {
  const Matrix phi = Matrix::Zero(3, 3);
  const Vector w = Vector::Constant(3, 1.0 / 3);
  Vector bad = w;
  bad(1) = 0.0;
  CHECK_THROWS_AS(solve_potentials(phi, bad), ConfigError);
  Vector unbalanced = w * 2.0;
  CHECK_THROWS_AS(solve_potentials(phi, w, unbalanced), ConfigError);
  Matrix nan_phi = phi;
  nan_phi(0, 1) = std::nan("");
  CHECK_THROWS_AS(solve_potentials(nan_phi, w), NumericError);
  const Matrix stiff = uniform_phi(50, 50, -40.0, 40.0, 2);
  const Vector w50 = Vector::Constant(50, 0.02);
  try {
    solve_potentials(stiff, w50, SolverOptions{1e-15, 3});
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.iterations() == 3);
    CHECK(e.residual() > 1e-15);
  }
}

TEST_CASE("implicit derivatives match finite differences and the dense system") {
  const int n = 12, K = 3;
  const Vector w = Vector::Constant(n, 1.0 / n);
  std::vector<Matrix> grad;
  for (int k = 0; k < K; ++k) grad.push_back(uniform_phi(n, n, -1.0, 1.0, 100 + k));
  Vector coef(K);
  coef << 0.7, -0.4, 1.1;
  auto phi_at = [&](const Vector& c) {
    Matrix m = Matrix::Zero(n, n);
    for (int k = 0; k < K; ++k) m += c(k) * grad[k];
    return m;
  };
  const SolverOptions tight{1e-15, 100000, true};
  const auto pots = solve_potentials(phi_at(coef), w, tight);
  const auto dens = matching_density(phi_at(coef), pots);
  const auto d = differentiate_potentials(grad, dens, w);
  CHECK(d.Da.row(0).cwiseAbs().maxCoeff() == 0.0);

  const double h = 1e-6;
  for (int k = 0; k < K; ++k) {
    Vector up = coef, dn = coef;
    up(k) += h;
    dn(k) -= h;
    const auto pu = solve_potentials(phi_at(up), w, tight);
    const auto pd = solve_potentials(phi_at(dn), w, tight);
    const Vector fa = (pu.a - pd.a) / (2 * h);
    const Vector fb = (pu.b - pd.b) / (2 * h);
    CHECK((fa - d.Da.col(k)).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((fb - d.Db.col(k)).cwiseAbs().maxCoeff() < 1e-7);
  }

  // Dense 2n x 2n system [I, P~; P^T, I] with P = n pi, which has unit margins.
  const Matrix P = n * dens.pi();
  Matrix M = Matrix::Identity(2 * n, 2 * n);
  M.topRightCorner(n, n) = P;
  M.topRightCorner(n, n).row(0).setZero();
  M.bottomLeftCorner(n, n) = P.transpose();
  Matrix rhs(2 * n, K);
  for (int k = 0; k < K; ++k) {
    rhs.col(k).head(n) = (P.cwiseProduct(grad[k])).rowwise().sum();
    rhs(0, k) = 0.0;
    rhs.col(k).tail(n) = (P.cwiseProduct(grad[k])).colwise().sum().transpose();
  }
  const Matrix sol = M.fullPivLu().solve(rhs);
  CHECK((sol.topRows(n) - d.Da).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((sol.bottomRows(n) - d.Db).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sample wages follow the transfer equation") {
  const auto sample = testing::random_sample(6, 2, 2, 4);
  const auto spec = testing::four_bases();
  const auto th = testing::random_theta(spec, 9);
  const Matrix phi = phi_matrix(th, spec, sample);
  const auto pots = solve_potentials(phi, sample.weights(), SolverOptions{1e-14, 100000});
  const Vector w = sample_wages(th, spec, sample, pots);
  for (int i = 0; i < sample.n(); ++i) {
    const double al = alpha_value(th, spec, sample.worker(i), sample.firm(i));
    const double ga = gamma_value(th, spec, sample.worker(i), sample.firm(i));
    const double ref =
        th.sigma1 * (ga - pots.b(i)) + th.sigma2 * (pots.a(i) - al) + th.t;
    CHECK(w(i) == doctest::Approx(ref).epsilon(1e-13));
  }
}
