#pragma once

#include "jobmatch/likelihood.hpp"
#include "jobmatch/optimize.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace jobmatch {

// How sigma1, sigma2 are mapped from the unconstrained optimizer coordinates.
enum class Reparameterization { Exp, Softplus };

std::string to_string(Reparameterization r);
Reparameterization reparameterization_from_string(const std::string& s);

struct EstimatorOptions {
  // Polished to the rounding floor so the objective does not depend on the warm-start path.
  SolverOptions solver{1e-12, 10000, true};
  OptimizerOptions optimizer;
  Reparameterization reparam = Reparameterization::Exp;
  // sigma-hat below this is reported on the boundary and refit with the coordinate pinned at 0.
  double boundary_tol = 1e-8;
  // sigma-hat below this whose score still points at zero triggers a pinned refit.
  double boundary_probe = 1e-3;
  bool compute_std_errors = true;
  double hessian_step = 1e-5;
  // Default start: Phi = 0, sigma1 = sigma2 = 0.25, t = mean W, s2 = var W.
  std::optional<Theta> initial;
};

enum class EstimationMethod { Full, Concentrated, MatchingOnly };
std::string to_string(EstimationMethod m);

struct ConvergenceInfo {
  bool converged = false;
  std::string status;
  int iterations = 0;
  int evaluations = 0;
  double grad_norm = 0.0;        // sup-norm of the projected natural-parameter gradient
  std::vector<double> history;   // log-likelihood after each accepted step
};

struct StdErrorResult {
  bool ok = false;
  std::string status;
  Matrix covariance;             // over the flat theta layout; rows of absent coordinates are NaN
  Vector std_errors;             // flat theta layout, NaN where absent
  std::vector<bool> present;
};

struct EstimationReport {
  EstimationMethod method = EstimationMethod::Full;
  Theta theta_hat;
  Vector phi_hat;
  Vector std_errors;              // flat theta layout; NaN where absent
  std::vector<bool> std_error_present;
  Vector phi_std_errors;          // NaN where absent
  Matrix covariance;
  std::string std_error_status;
  LikelihoodBreakdown loglik;
  double r_squared = 0.0;         // NaN without observed transfers
  ConvergenceInfo convergence;
  bool split_identified = true;   // false when no transfer is observed
  std::vector<bool> phi_identified;
  std::vector<bool> sigma_on_boundary = {false, false};
  std::vector<std::string> warnings;
  EstimatorOptions options;
  int n = 0;
  int n_observed = 0;
};

EstimationReport estimate(const MatchSample& sample, const BasisSpec& spec,
                          const EstimatorOptions& options = {});

EstimationReport estimate_concentrated(const MatchSample& sample, const BasisSpec& spec,
                                       const EstimatorOptions& options = {});

// Standard errors from the central-difference Jacobian of the analytic gradient at theta_hat.
// `pinned` marks sigma1/sigma2 held at the boundary; those and masked coefficients are absent.
StdErrorResult standard_errors(const Theta& theta_hat, const MatchSample& sample,
                               const BasisSpec& spec, const EstimatorOptions& options = {},
                               std::vector<bool> pinned = {false, false});

// Generic version over a gradient callback: sqrt(diag((-H)^-1)) on the coordinates in `free`.
using GradientFunction = std::function<Vector(const Vector&)>;
StdErrorResult hessian_standard_errors(const GradientFunction& grad, const Vector& x,
                                       const std::vector<bool>& free, double step = 1e-5);

struct LikelihoodRatioTest {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

// 2 (logL_unrestricted - logL_restricted) against a chi-square with df degrees of freedom.
LikelihoodRatioTest likelihood_ratio_test(double loglik_unrestricted, double loglik_restricted,
                                          int df);

// 1 - SSR / SST over observed transfers, weighted by the observation weights.
double transfer_r_squared(const MatchSample& sample, const Vector& predicted);

}  // namespace jobmatch
