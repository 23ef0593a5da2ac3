#include "jobmatch/equilibrium.hpp"

#include "jobmatch/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace jobmatch {

namespace {

// log sum_k exp(v_k - shift_k) over a contiguous run of values.
inline double log_sum_exp(const double* v, const double* shift, Eigen::Index len) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < len; ++k) m = std::max(m, v[k] - shift[k]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index k = 0; k < len; ++k) s += std::exp(v[k] - shift[k] - m);
  return m + std::log(s);
}

void check_masses(const Vector& mass, const char* side) {
  if (mass.size() == 0 || (mass.array() <= 0.0).any() || !mass.allFinite()) {
    throw ConfigError(std::string(side) + " masses must be positive and finite");
  }
}

}  // namespace

Potentials solve_potentials(const Matrix& phi, const Vector& row_mass, const Vector& col_mass,
                            const SolverOptions& options, const Potentials* warm_start) {
  const auto R = phi.rows();
  const auto C = phi.cols();
  if (row_mass.size() != R || col_mass.size() != C) {
    throw ConfigError("mass vectors do not match the phi dimensions");
  }
  check_masses(row_mass, "row");
  check_masses(col_mass, "column");
  if (!(options.tol > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (std::abs(row_mass.sum() - col_mass.sum()) > 1e-12) {
    throw ConfigError("row and column masses must have equal totals");
  }
  if (!phi.allFinite()) throw NumericError("phi contains non-finite entries");

  // Column-major phi serves the column reductions, its transpose the row reductions.
  const Matrix phi_t = phi.transpose();
  const Vector log_p = row_mass.array().log();
  const Vector log_q = col_mass.array().log();

  Vector a = Vector::Zero(R);
  Vector b = Vector::Zero(C);
  if (warm_start != nullptr && warm_start->a.size() == R && warm_start->b.size() == C &&
      warm_start->a.allFinite()) {
    a = warm_start->a;
  }

  Vector row_lse(R);
  double residual = std::numeric_limits<double>::infinity();
  int iter = 0;
  bool reached = false;
  int stalled = 0;
  double best = std::numeric_limits<double>::infinity();
  for (; iter < options.max_iter; ++iter) {
    for (Eigen::Index j = 0; j < C; ++j) {
      b(j) = log_sum_exp(phi.col(j).data(), a.data(), R) - log_q(j);
    }
    residual = 0.0;
    for (Eigen::Index i = 0; i < R; ++i) {
      row_lse(i) = log_sum_exp(phi_t.col(i).data(), b.data(), C);
      residual = std::max(residual, std::abs(std::exp(row_lse(i) - a(i)) - row_mass(i)));
    }
    if (!std::isfinite(residual)) {
      throw NumericError("potential iteration produced a non-finite value at iteration " +
                         std::to_string(iter));
    }
    if (residual <= options.tol) {
      if (!options.polish) break;
      reached = true;
      if (residual < best) {
        best = residual;
        stalled = 0;
      } else if (++stalled >= 3 || residual == 0.0) {
        break;
      }
    }
    a = row_lse - log_p;
  }
  if (iter == options.max_iter && reached) {
    --iter;
  } else if (iter == options.max_iter) {
    std::ostringstream os;
    os << "potentials did not converge in " << options.max_iter
       << " iterations (residual " << residual << ")";
    throw ConvergenceError(os.str(), residual, iter);
  }

  const double shift = a(0);
  a.array() -= shift;
  b.array() += shift;

  double col_residual = 0.0;
  for (Eigen::Index j = 0; j < C; ++j) {
    const double lse = log_sum_exp(phi.col(j).data(), a.data(), R);
    col_residual = std::max(col_residual, std::abs(std::exp(lse - b(j)) - col_mass(j)));
  }

  Potentials out;
  out.a = std::move(a);
  out.b = std::move(b);
  out.iterations = iter + 1;
  out.residual = std::max(residual, col_residual);
  return out;
}

Potentials solve_potentials(const Matrix& phi, const Vector& weights, const SolverOptions& options,
                            const Potentials* warm_start) {
  if (phi.rows() != phi.cols()) throw ConfigError("sample phi must be square");
  return solve_potentials(phi, weights, weights, options, warm_start);
}

MatchingDensity matching_density(const Matrix& phi, const Potentials& pots) {
  MatchingDensity d;
  d.log_pi = phi;
  d.log_pi.colwise() -= pots.a;
  d.log_pi.rowwise() -= pots.b.transpose();
  return d;
}

double marginal_residual(const MatchingDensity& density, const Vector& row_mass,
                         const Vector& col_mass) {
  const Matrix pi = density.pi();
  const double rows = (pi.rowwise().sum() - row_mass).cwiseAbs().maxCoeff();
  const double cols = (pi.colwise().sum().transpose() - col_mass).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

PotentialDerivatives differentiate_potentials(const std::vector<Matrix>& phi_grad,
                                              const MatchingDensity& density,
                                              const Vector& row_mass, const Vector& col_mass) {
  const auto R = density.log_pi.rows();
  const auto C = density.log_pi.cols();
  const auto K = static_cast<Eigen::Index>(phi_grad.size());
  if (row_mass.size() != R || col_mass.size() != C) {
    throw ConfigError("mass vectors do not match the density dimensions");
  }
  const Matrix pi = density.pi();

  Matrix E(R, K);
  Matrix F(C, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Matrix& g = phi_grad[k];
    if (g.rows() != R || g.cols() != C) throw ConfigError("phi gradient has wrong shape");
    const Matrix weighted = pi.cwiseProduct(g);
    E.col(k) = weighted.rowwise().sum();
    F.col(k) = weighted.colwise().sum().transpose();
  }
  E.row(0).setZero();

  Matrix pi_tilde = pi;
  pi_tilde.row(0).setZero();
  const Vector inv_p = row_mass.cwiseInverse();

  // S = diag(q) - Pi^T diag(1/p) Pi~, rhs = F - Pi^T diag(1/p) E.
  const Matrix scaled_t = pi.transpose() * inv_p.asDiagonal();
  Matrix S = -scaled_t * pi_tilde;
  S.diagonal() += col_mass;
  const Matrix rhs = F - scaled_t * E;

  Eigen::PartialPivLU<Matrix> lu(S);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    std::ostringstream os;
    os << "potential derivative system is singular (reciprocal condition " << rcond << ")";
    throw LinearAlgebraError(os.str(), rcond);
  }

  PotentialDerivatives out;
  out.Db = lu.solve(rhs);
  out.Da = inv_p.asDiagonal() * (E - pi_tilde * out.Db);
  out.Da.row(0).setZero();
  out.rcond = rcond;
  if (!out.Da.allFinite() || !out.Db.allFinite()) {
    throw LinearAlgebraError("potential derivative solve produced non-finite values", rcond);
  }
  return out;
}

PotentialDerivatives differentiate_potentials(const std::vector<Matrix>& phi_grad,
                                              const MatchingDensity& density,
                                              const Vector& weights) {
  return differentiate_potentials(phi_grad, density, weights, weights);
}

Vector sample_wages(const Theta& theta, const BasisSpec& spec, const MatchSample& sample,
                    const Potentials& pots) {
  const int n = sample.n();
  if (pots.a.size() != n || pots.b.size() != n) {
    throw ConfigError("potentials do not match the sample size");
  }
  Vector w(n);
  for (int i = 0; i < n; ++i) {
    const auto x = sample.worker(i);
    const auto y = sample.firm(i);
    const double gamma_ii = gamma_value(theta, spec, x, y);
    const double alpha_ii = alpha_value(theta, spec, x, y);
    w(i) = theta.sigma1 * (gamma_ii - pots.b(i)) + theta.sigma2 * (pots.a(i) - alpha_ii) + theta.t;
  }
  return w;
}

}  // namespace jobmatch
