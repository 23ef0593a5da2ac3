#pragma once

#include "jobmatch/model.hpp"

namespace jobmatch {

struct OlsFit {
  Vector coef;
  Vector std_errors;  // classical, from ssr / (n - p)
  Vector residuals;
  double ssr = 0.0;
  double r_squared = 0.0;
};

// Weighted least squares of y on the columns of X (weights default to 1).
// Throws RankDeficiencyError when X does not have full column rank.
OlsFit ols(const Matrix& X, const Vector& y, const Vector& weights = Vector());

}  // namespace jobmatch
