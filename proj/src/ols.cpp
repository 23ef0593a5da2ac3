#include "jobmatch/ols.hpp"

#include "jobmatch/error.hpp"

#include <cmath>
#include <limits>

namespace jobmatch {

OlsFit ols(const Matrix& X, const Vector& y, const Vector& weights) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (y.size() != n) throw ConfigError("response length differs from design rows");
  if (n < p || p == 0) throw RankDeficiencyError("fewer observations than regressors");
  Vector w = weights.size() == 0 ? Vector::Ones(n) : weights;
  if (w.size() != n || (w.array() <= 0.0).any()) throw ConfigError("bad regression weights");

  const Vector sw = w.cwiseSqrt();
  const Matrix Xw = sw.asDiagonal() * X;
  const Vector yw = sw.cwiseProduct(y);

  Eigen::ColPivHouseholderQR<Matrix> qr(Xw);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    throw RankDeficiencyError("design matrix has rank " + std::to_string(qr.rank()) + " < " +
                              std::to_string(p));
  }

  OlsFit fit;
  fit.coef = qr.solve(yw);
  fit.residuals = y - X * fit.coef;
  fit.ssr = (w.array() * fit.residuals.array().square()).sum();
  const double ybar = (w.array() * y.array()).sum() / w.sum();
  const double sst = (w.array() * (y.array() - ybar).square()).sum();
  fit.r_squared = sst > 0.0 ? 1.0 - fit.ssr / sst : 1.0;

  fit.std_errors = Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
  if (n > p) {
    const double s2 = fit.ssr / static_cast<double>(n - p);
    const Matrix xtx = Xw.transpose() * Xw;
    const Matrix inv = xtx.ldlt().solve(Matrix::Identity(p, p));
    fit.std_errors = (s2 * inv.diagonal().array()).sqrt();
  }
  return fit;
}

}  // namespace jobmatch
