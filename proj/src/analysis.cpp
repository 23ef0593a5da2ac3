#include "jobmatch/analysis.hpp"

#include "jobmatch/error.hpp"
#include "jobmatch/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jobmatch {

double alpha_risk_slope(const Theta& theta, const BasisSpec& spec, int risk_column,
                        std::span<const double> worker) {
  validate(theta, spec);
  bool found = false;
  double slope = 0.0;
  for (int k = 0; k < spec.size(); ++k) {
    if (!spec.alpha_mask()[k]) continue;
    const auto& f = spec.function(k);
    if (f.is_custom()) {
      if (f.depends_on_y()) {
        throw ConfigError("alpha basis '" + f.name() + "' is custom; its risk slope is unknown");
      }
      continue;
    }
    if (f.firm_index() != risk_column + 1) continue;
    found = true;
    double xk = 1.0;
    if (f.worker_index() > 0) {
      if (static_cast<int>(worker.size()) < f.worker_index()) {
        throw ConfigError("basis '" + f.name() + "' needs worker covariates to evaluate the slope");
      }
      xk = worker[f.worker_index() - 1];
    }
    slope += theta.A(k) * xk;
  }
  if (!found) {
    throw ConfigError("no alpha basis is linear in firm column " + std::to_string(risk_column));
  }
  return theta.sigma() * slope;
}

double vsl(const Theta& theta, const BasisSpec& spec, const VslUnits& units,
           std::span<const double> worker) {
  return -alpha_risk_slope(theta, spec, units.risk_column, worker) * units.mean_earnings *
         units.risk_unit_scale;
}

HedonicResult hedonic_baseline(const MatchSample& sample, const HedonicSpec& spec,
                               const VslUnits& units) {
  for (int c : spec.worker_columns) {
    if (c < 0 || c >= sample.worker_dim()) throw ConfigError("hedonic worker column out of range");
  }
  for (int c : spec.firm_columns) {
    if (c < 0 || c >= sample.firm_dim()) throw ConfigError("hedonic firm column out of range");
  }
  const auto risk_it = std::find(spec.firm_columns.begin(), spec.firm_columns.end(),
                                 units.risk_column);
  if (risk_it == spec.firm_columns.end()) {
    throw ConfigError("the risk column must be a hedonic regressor");
  }

  std::vector<int> rows;
  for (int i = 0; i < sample.n(); ++i) {
    if (sample.transfers()[i]) rows.push_back(i);
  }
  const int p = static_cast<int>(spec.intercept + spec.worker_columns.size() +
                                 spec.firm_columns.size());
  if (static_cast<int>(rows.size()) <= p) {
    throw RankDeficiencyError("hedonic regression needs more observed transfers than regressors");
  }

  HedonicResult out;
  if (spec.intercept) out.names.push_back("const");
  for (int c : spec.worker_columns) out.names.push_back("x" + std::to_string(c + 1));
  for (int c : spec.firm_columns) out.names.push_back("y" + std::to_string(c + 1));

  Matrix X(rows.size(), p);
  Vector y(rows.size()), w(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int i = rows[r];
    int col = 0;
    if (spec.intercept) X(r, col++) = 1.0;
    for (int c : spec.worker_columns) X(r, col++) = sample.workers()(i, c);
    for (int c : spec.firm_columns) X(r, col++) = sample.firms()(i, c);
    y(r) = *sample.transfers()[i];
    w(r) = sample.weights()(i);
  }
  out.fit = ols(X, y, w);
  out.n_rows = static_cast<int>(rows.size());
  const int risk_pos = static_cast<int>(spec.intercept + spec.worker_columns.size() +
                                        (risk_it - spec.firm_columns.begin()));
  out.risk_coef = out.fit.coef(risk_pos);
  out.risk_se = out.fit.std_errors(risk_pos);
  out.vsl_h = out.risk_coef * units.mean_earnings * units.risk_unit_scale;
  return out;
}

double gini(const Vector& values, const Vector& weights) {
  const auto n = values.size();
  if (n == 0) throw ConfigError("gini of an empty vector");
  Vector w = weights.size() == 0 ? Vector::Ones(n) : weights;
  if (w.size() != n) throw ConfigError("gini weights do not match the values");
  if ((values.array() < 0.0).any() || !values.allFinite()) {
    throw ConfigError("gini needs finite nonnegative values");
  }
  if ((w.array() < 0.0).any() || !(w.sum() > 0.0)) throw ConfigError("gini needs positive weights");

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  const double W = w.sum();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += w(i) * values(i);
  if (!(total > 0.0)) throw ConfigError("gini is undefined when every value is zero");

  // G = 1 - sum_k (w_k / W) (L_{k-1} + L_k)
  double lorenz_prev = 0.0, acc = 0.0, area = 0.0;
  for (Eigen::Index idx : order) {
    acc += w(idx) * values(idx);
    const double lorenz = acc / total;
    area += w(idx) / W * (lorenz_prev + lorenz);
    lorenz_prev = lorenz;
  }
  return std::clamp(1.0 - area, 0.0, 1.0);
}

FirmTransform risk_cap(int column, double cap) {
  return [column, cap](std::span<double> y) {
    if (column < 0 || column >= static_cast<int>(y.size())) {
      throw ConfigError("risk cap column out of range");
    }
    y[column] = std::min(y[column], cap);
  };
}

Matrix wage_surface(const Theta& theta, const BasisSpec& spec, const RowMatrix& workers,
                    const RowMatrix& firms, const Potentials& pots) {
  const Matrix alpha = phi_matrix(theta.A, spec, workers, firms);
  const Matrix gamma = phi_matrix(theta.Gamma, spec, workers, firms);
  Matrix w(alpha.rows(), alpha.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      w(i, j) = theta.sigma1 * (gamma(i, j) - pots.b(j)) +
                theta.sigma2 * (pots.a(i) - alpha(i, j)) + theta.t;
    }
  }
  return w;
}

namespace {

struct TypeEquilibrium {
  TypeReduction types;
  Matrix pi;
  Matrix wages;
  double residual = 0.0;
};

TypeEquilibrium solve_types(const Theta& theta, const BasisSpec& spec, const MatchSample& sample,
                            const SolverOptions& options) {
  TypeEquilibrium eq;
  eq.types = TypeReduction::build(sample);
  const Matrix phi =
      phi_matrix(theta.phi(), spec, eq.types.worker_types, eq.types.firm_types);
  const Potentials pots =
      solve_potentials(phi, eq.types.worker_mass, eq.types.firm_mass, options);
  const MatchingDensity density = matching_density(phi, pots);
  eq.pi = density.pi();
  eq.residual = marginal_residual(density, eq.types.worker_mass, eq.types.firm_mass);
  eq.wages = wage_surface(theta, spec, eq.types.worker_types, eq.types.firm_types, pots);
  return eq;
}

Vector to_level(const Vector& w, bool log_transfers) {
  return log_transfers ? Vector(w.array().exp()) : w;
}

Matrix to_level(const Matrix& w, bool log_transfers) {
  return log_transfers ? Matrix(w.array().exp()) : w;
}

}  // namespace

CounterfactualResult counterfactual(const Theta& theta, const BasisSpec& spec,
                                    const MatchSample& sample, const FirmTransform& transform,
                                    bool log_transfers, const SolverOptions& options) {
  validate(theta, spec);
  RowMatrix firms = sample.firms();
  for (Eigen::Index j = 0; j < firms.rows(); ++j) {
    transform(std::span<double>(firms.row(j).data(), static_cast<std::size_t>(firms.cols())));
  }
  const MatchSample after_sample = sample.with_firms(std::move(firms));

  const TypeEquilibrium before = solve_types(theta, spec, sample, options);
  const TypeEquilibrium after = solve_types(theta, spec, after_sample, options);

  // Before firm type -> after firm type. The transform is a function of covariates, so each
  // before type lands in exactly one after type.
  const int nb = before.types.n_firm_types();
  std::vector<int> maps_to(nb, -1);
  for (int i = 0; i < sample.n(); ++i) {
    maps_to[before.types.firm_type_of[i]] = after.types.firm_type_of[i];
  }

  CounterfactualResult r;
  r.pi_before = before.pi;
  r.pi_after.resize(before.pi.rows(), nb);
  for (int v = 0; v < nb; ++v) {
    const int va = maps_to[v];
    const double share = before.types.firm_mass(v) / after.types.firm_mass(va);
    r.pi_after.col(v) = after.pi.col(va) * share;
  }
  r.residual_after = after.residual;
  r.share_changed = 0.5 * (r.pi_after - r.pi_before).cwiseAbs().sum();

  const int n = sample.n();
  r.wages_before.resize(n);
  r.wages_after.resize(n);
  for (int i = 0; i < n; ++i) {
    r.wages_before(i) = before.wages(before.types.worker_type_of[i], before.types.firm_type_of[i]);
    r.wages_after(i) = after.wages(after.types.worker_type_of[i], after.types.firm_type_of[i]);
  }
  r.level_wages_before = to_level(r.wages_before, log_transfers);
  r.level_wages_after = to_level(r.wages_after, log_transfers);

  const Matrix level_b = to_level(before.wages, log_transfers);
  const Matrix level_a = to_level(after.wages, log_transfers);
  r.mean_wage_before = (before.pi.array() * level_b.array()).sum() / before.pi.sum();
  r.mean_wage_after = (after.pi.array() * level_a.array()).sum() / after.pi.sum();
  r.mean_wage_change = (r.mean_wage_after - r.mean_wage_before) / r.mean_wage_before;

  auto cell_gini = [](const Matrix& level, const Matrix& pi) {
    const Vector v = Eigen::Map<const Vector>(level.data(), level.size());
    const Vector w = Eigen::Map<const Vector>(pi.data(), pi.size());
    return gini(v, w);
  };
  r.gini_before = cell_gini(level_b, before.pi);
  r.gini_after = cell_gini(level_a, after.pi);
  return r;
}

}  // namespace jobmatch
