#pragma once

#include "jobmatch/model.hpp"

#include <vector>

namespace jobmatch {

struct SolverOptions {
  double tol = 1e-10;  // sup-norm of marginal violations
  int max_iter = 10000;
  // After reaching tol, keep sweeping while the residual still falls, so the result sits at the
  // rounding floor and does not depend on the warm start.
  bool polish = false;
};

// Potentials (a, b) of the balanced entropic system, normalized so that a[0] == 0.
struct Potentials {
  Vector a;
  Vector b;
  int iterations = 0;
  double residual = 0.0;
};

struct MatchingDensity {
  Matrix log_pi;
  Matrix pi() const { return log_pi.array().exp().matrix(); }
};

// Solves sum_j exp(phi_ij - a_i - b_j) = row_mass_i and sum_i exp(phi_ij - a_i - b_j) = col_mass_j
// by alternating log-domain updates. `warm_start`, when given, seeds (a, b).
// Throws ConvergenceError past max_iter and NumericError on NaN.
Potentials solve_potentials(const Matrix& phi, const Vector& row_mass, const Vector& col_mass,
                            const SolverOptions& options = {},
                            const Potentials* warm_start = nullptr);

// Sample system: both margins equal to the observation weights.
Potentials solve_potentials(const Matrix& phi, const Vector& weights,
                            const SolverOptions& options = {},
                            const Potentials* warm_start = nullptr);

MatchingDensity matching_density(const Matrix& phi, const Potentials& pots);

// max(|row sums - row_mass|, |col sums - col_mass|).
double marginal_residual(const MatchingDensity& density, const Vector& row_mass,
                         const Vector& col_mass);

struct PotentialDerivatives {
  Matrix Da;  // rows x K, row 0 identically zero
  Matrix Db;  // cols x K
  double rcond = 0.0;
};

// Implicit derivatives of (a, b) with respect to Phi. phi_grad[k] holds d phi_ij / d Phi_k.
// Differentiating the two margin equations with a_0 pinned gives
//   p_i Da_i + sum_j pi_ij Db_j = E_i   (i >= 1),   Da_0 = 0,
//   sum_i pi_ij Da_i + q_j Db_j = F_j,
// which is eliminated through the Schur complement in Db.
PotentialDerivatives differentiate_potentials(const std::vector<Matrix>& phi_grad,
                                              const MatchingDensity& density,
                                              const Vector& row_mass, const Vector& col_mass);

PotentialDerivatives differentiate_potentials(const std::vector<Matrix>& phi_grad,
                                              const MatchingDensity& density,
                                              const Vector& weights);

// w_i = sigma1 (gamma_ii - b_i) + sigma2 (a_i - alpha_ii) + t, with a_i, b_i the potentials of
// worker i and firm i.
Vector sample_wages(const Theta& theta, const BasisSpec& spec, const MatchSample& sample,
                    const Potentials& pots);

}  // namespace jobmatch
