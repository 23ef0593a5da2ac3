#pragma once

#include "jobmatch/model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace jobmatch {

struct OptimizerOptions {
  double grad_tol = 1e-6;  // sup-norm, as judged by the convergence test
  int max_iter = 1000;
  double c1 = 1e-4;        // sufficient decrease
  double c2 = 0.9;         // curvature
};

struct OptimizerResult {
  Vector x;
  double f = 0.0;
  Vector grad;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;
  // Objective after each accepted step. Nonincreasing up to 1e-12 relative: within that
  // resolution steps are accepted on slope and gradient evidence.
  std::vector<double> history;
};

// Returns f(x) and writes its gradient. May throw jobmatch::Error at infeasible trial points;
// the line search then backtracks.
using Objective = std::function<double(const Vector& x, Vector& grad)>;
// Decides convergence from the current point and gradient. Defaults to ||grad||_inf <= grad_tol.
using ConvergenceTest = std::function<bool(const Vector& x, const Vector& grad)>;

// Minimizes with BFGS and a strong-Wolfe line search.
OptimizerResult minimize_bfgs(const Objective& objective, Vector x0,
                              const OptimizerOptions& options = {},
                              const ConvergenceTest& converged = {});

}  // namespace jobmatch
