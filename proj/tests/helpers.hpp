#pragma once

#include "jobmatch/model.hpp"

#include <random>

namespace jobmatch::testing {

// Continuous covariates, so every observation is its own type.
inline MatchSample random_sample(int n, int dx, int dy, std::uint64_t seed, double noise = 0.3,
                                 double missing = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RowMatrix X(n, dx), Y(n, dy);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < dx; ++c) X(i, c) = z(rng);
    for (int c = 0; c < dy; ++c) Y(i, c) = z(rng);
  }
  Transfers W(n);
  for (int i = 0; i < n; ++i) {
    const double w = 1.0 + 0.5 * X(i, 0) + 0.3 * Y(i, 0) + noise * z(rng);
    if (u(rng) >= missing) W[i] = w;
  }
  return MatchSample(X, Y, W);
}

// Four bilinear bases on two-dimensional covariates, one of each identification pattern.
inline BasisSpec four_bases() {
  return BasisSpec({BasisFunction::product(1, 1), BasisFunction::product(1, 2),
                    BasisFunction::product(2, 1), BasisFunction::product(2, 2)},
                   {true, true, false, true}, {true, false, true, true});
}

inline Theta random_theta(const BasisSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  Theta th = Theta::zeros(spec.size());
  for (int k = 0; k < spec.size(); ++k) {
    if (spec.alpha_mask()[k]) th.A(k) = u(rng);
    if (spec.gamma_mask()[k]) th.Gamma(k) = u(rng);
  }
  std::uniform_real_distribution<double> s(0.2, 0.8);
  th.sigma1 = s(rng);
  th.sigma2 = s(rng);
  th.t = u(rng);
  th.s2 = 0.1 + s(rng);
  return th;
}

}  // namespace jobmatch::testing
