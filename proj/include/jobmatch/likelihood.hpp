#pragma once

#include "jobmatch/equilibrium.hpp"
#include "jobmatch/model.hpp"

#include <optional>
#include <vector>

namespace jobmatch {

struct LikelihoodBreakdown {
  double logL1 = 0.0;       // matching term
  double logL2 = 0.0;       // transfer term
  double binomial = 0.0;    // n° log p + (n - n°) log(1 - p) at p = n°/n
  double total = 0.0;
  int n_observed_transfers = 0;
};

// sum_i (phi_ii - a_i - b_i); equals sum_i log pi_ii for the sample system.
double log_l1(const Matrix& phi, const Potentials& pots);

// -sum_obs (W_i - w_i)^2 / (2 s2) - (n°/2) log s2 over observed transfers; 0 when none observed.
double log_l2(const Theta& theta, const Transfers& observed, const Vector& predicted);

// Worker and firm covariate types of a sample. Observations with identical covariate rows
// share a type; type masses are the summed observation weights. Worker type 0 is the type of
// observation 0, so the a-normalization lands on observation 0 as in the sample system.
struct TypeReduction {
  RowMatrix worker_types;
  RowMatrix firm_types;
  std::vector<int> worker_type_of;  // per observation
  std::vector<int> firm_type_of;
  Vector worker_mass;
  Vector firm_mass;

  static TypeReduction build(const MatchSample& sample);
  int n_worker_types() const { return static_cast<int>(worker_types.rows()); }
  int n_firm_types() const { return static_cast<int>(firm_types.rows()); }
};

// Equilibrium of the sample at a given Phi, on the type-reduced system.
struct SampleEquilibrium {
  Vector phi_coef;
  Matrix phi;              // worker types x firm types
  Potentials pots;         // type potentials, a[0] == 0
  MatchingDensity density;  // type-level pi, margins = type masses
  Vector a_obs;            // potential of worker i
  Vector b_obs;            // potential of firm i
};

struct ConcentratedResult {
  double value = 0.0;
  LikelihoodBreakdown breakdown;
  // (sigma1*, sigma2*, t*, s2*); absent when no transfer is observed.
  std::optional<Theta> inner;
  bool degenerate_fit = false;  // s2* floored because the fit is exact
  std::vector<bool> on_boundary = {false, false};  // sigma1*, sigma2* pinned at zero
  Vector gradient;  // d/dA then d/dGamma at the inner optimum, length 2K
};

// Log-likelihood of a sample with its gradient. Holds the last equilibrium so repeated
// evaluations at nearby Phi warm-start the potential solver and value and gradient always
// share one set of converged potentials.
class Likelihood {
 public:
  Likelihood(MatchSample sample, BasisSpec spec, SolverOptions options = {});

  const MatchSample& sample() const { return sample_; }
  const BasisSpec& spec() const { return spec_; }
  const TypeReduction& types() const { return types_; }
  const SolverOptions& solver_options() const { return options_; }

  const SampleEquilibrium& equilibrium(const Vector& phi);

  LikelihoodBreakdown evaluate(const Theta& theta);
  // Full gradient in the (A, Gamma, sigma1, sigma2, t, s2) layout; masked entries are zero.
  // Binomial missing-data terms are constant in theta and excluded.
  Vector gradient(const Theta& theta);
  Vector predicted_wages(const Theta& theta);

  ConcentratedResult concentrated(const Vector& A, const Vector& Gamma, bool with_gradient = true);

  // Count-weighted sum of phi_k(X_i, Y_i): the observed moments of the basis.
  Vector observed_moments() const;
  // sum_ij pi_ij phi_k(X_i, Y_j) times the total count: the moments predicted at Phi.
  Vector predicted_moments(const Vector& phi);

  double effective_observed() const { return n_obs_eff_; }

 private:
  Vector log_l1_gradient(const SampleEquilibrium& eq) const;
  double log_l1_value(const SampleEquilibrium& eq) const;

  MatchSample sample_;
  BasisSpec spec_;
  SolverOptions options_;
  TypeReduction types_;
  std::vector<Matrix> type_basis_;  // K matrices on the type grid
  Matrix diag_basis_;               // n x K, phi_k(X_i, Y_i)
  Vector count_weight_;             // w_i / min w
  double total_count_ = 0.0;
  std::vector<int> observed_;       // indices with a transfer
  Vector observed_values_;
  double n_obs_eff_ = 0.0;
  std::optional<SampleEquilibrium> cache_;
};

LikelihoodBreakdown log_likelihood(const Theta& theta, const BasisSpec& spec,
                                   const MatchSample& sample, const SolverOptions& options = {});

Vector gradient(const Theta& theta, const BasisSpec& spec, const MatchSample& sample,
                const SolverOptions& options = {});

ConcentratedResult concentrated_log_likelihood(const Vector& A, const Vector& Gamma,
                                               const BasisSpec& spec, const MatchSample& sample,
                                               const SolverOptions& options = {});

}  // namespace jobmatch
