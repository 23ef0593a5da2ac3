#pragma once

#include "jobmatch/equilibrium.hpp"
#include "jobmatch/model.hpp"
#include "jobmatch/ols.hpp"

#include <functional>
#include <string>
#include <vector>

namespace jobmatch {

// Unit conversion for the value of a statistical life. Transfers are log wages, so the slope
// of alpha in the risk column is turned into money with mean earnings and the risk unit.
struct VslUnits {
  int risk_column = 0;          // firm covariate column (0-based)
  double mean_earnings = 1.0;   // z-bar, currency per year
  double risk_unit_scale = 1.0; // e.g. 1e5 when risk is in fatalities per 100,000
};

// d alpha / d y^(risk) in the units of the transfers: sigma times the slope of the
// renormalized alpha. Product bases x^(k) y^(risk) are evaluated at `worker` (the constant
// basis needs no worker covariates). Throws ConfigError when no alpha basis involves risk.
double alpha_risk_slope(const Theta& theta, const BasisSpec& spec, int risk_column,
                        std::span<const double> worker = {});

// -sigma * (d alpha / d risk) * mean_earnings * risk_unit_scale.
double vsl(const Theta& theta, const BasisSpec& spec, const VslUnits& units,
           std::span<const double> worker = {});

// Regressors of the hedonic wage equation: an intercept plus chosen covariate columns.
struct HedonicSpec {
  std::vector<int> worker_columns;
  std::vector<int> firm_columns;
  bool intercept = true;
};

struct HedonicResult {
  OlsFit fit;
  std::vector<std::string> names;
  int n_rows = 0;
  double risk_coef = 0.0;
  double risk_se = 0.0;
  double vsl_h = 0.0;  // risk_coef * mean_earnings * risk_unit_scale
};

// OLS of observed W on the regressors, weighted by the sample weights.
// `units.risk_column` must be among `spec.firm_columns`.
HedonicResult hedonic_baseline(const MatchSample& sample, const HedonicSpec& spec,
                               const VslUnits& units);

// Weighted Gini coefficient from the Lorenz curve of the sorted values.
double gini(const Vector& values, const Vector& weights = Vector());

using FirmTransform = std::function<void(std::span<double>)>;

// Sets firm covariate `column` to min(value, cap).
FirmTransform risk_cap(int column, double cap);

struct CounterfactualResult {
  Matrix pi_before;  // worker types x firm types (before the intervention)
  Matrix pi_after;   // same layout; after-type mass is split over the before types mapping to it
  Vector wages_before;  // per match, W scale
  Vector wages_after;
  Vector level_wages_before;  // exp(W) when transfers are logs, else equal to the W vectors
  Vector level_wages_after;
  double mean_wage_before = 0.0;  // expected level wage under pi
  double mean_wage_after = 0.0;
  double mean_wage_change = 0.0;  // relative
  double share_changed = 0.0;     // half the L1 distance between pi_after and pi_before
  double gini_before = 0.0;
  double gini_after = 0.0;
  double residual_after = 0.0;    // marginal residual of the after equilibrium
};

// Re-solves the equilibrium at fixed theta after applying `transform` to every firm row.
// Wage statistics use the full distribution of (worker type, firm type) cells under pi.
CounterfactualResult counterfactual(const Theta& theta, const BasisSpec& spec,
                                    const MatchSample& sample, const FirmTransform& transform,
                                    bool log_transfers, const SolverOptions& options = {1e-12, 100000});

// Transfers at every (worker type, firm type) pair: sigma1 (gamma - b) + sigma2 (a - alpha) + t.
Matrix wage_surface(const Theta& theta, const BasisSpec& spec, const RowMatrix& workers,
                    const RowMatrix& firms, const Potentials& pots);

}  // namespace jobmatch
