#include "jobmatch/likelihood.hpp"

#include "jobmatch/error.hpp"
#include "jobmatch/ols.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace jobmatch {

double log_l1(const Matrix& phi, const Potentials& pots) {
  const auto n = phi.rows();
  if (phi.cols() != n || pots.a.size() != n || pots.b.size() != n) {
    throw ConfigError("log_l1 needs a square phi and matching potentials");
  }
  return (phi.diagonal() - pots.a - pots.b).sum();
}

double log_l2(const Theta& theta, const Transfers& observed, const Vector& predicted) {
  if (static_cast<Eigen::Index>(observed.size()) != predicted.size()) {
    throw ConfigError("observed and predicted transfers differ in length");
  }
  if (!(theta.s2 > 0.0)) throw ConfigError("s2 must be positive");
  double ssr = 0.0;
  int n_obs = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!observed[i]) continue;
    const double r = *observed[i] - predicted(static_cast<Eigen::Index>(i));
    ssr += r * r;
    ++n_obs;
  }
  if (n_obs == 0) return 0.0;
  return -ssr / (2.0 * theta.s2) - 0.5 * n_obs * std::log(theta.s2);
}

// ---------------------------------------------------------------------------

namespace {

struct RowLess {
  bool operator()(const std::vector<double>& a, const std::vector<double>& b) const {
    return a < b;
  }
};

void reduce_side(const RowMatrix& rows, const Vector& weights, RowMatrix& types,
                 std::vector<int>& type_of, Vector& mass) {
  std::map<std::vector<double>, int, RowLess> index;
  std::vector<int> first;
  type_of.resize(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    std::vector<double> key(rows.row(i).data(), rows.row(i).data() + rows.cols());
    auto [it, inserted] = index.emplace(std::move(key), static_cast<int>(first.size()));
    if (inserted) first.push_back(static_cast<int>(i));
    type_of[i] = it->second;
  }
  types.resize(static_cast<Eigen::Index>(first.size()), rows.cols());
  mass = Vector::Zero(static_cast<Eigen::Index>(first.size()));
  for (std::size_t t = 0; t < first.size(); ++t) types.row(t) = rows.row(first[t]);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) mass(type_of[i]) += weights(i);
}

}  // namespace

TypeReduction TypeReduction::build(const MatchSample& sample) {
  TypeReduction r;
  reduce_side(sample.workers(), sample.weights(), r.worker_types, r.worker_type_of, r.worker_mass);
  reduce_side(sample.firms(), sample.weights(), r.firm_types, r.firm_type_of, r.firm_mass);
  // Equalize totals exactly so the balanced solver accepts them.
  r.firm_mass *= r.worker_mass.sum() / r.firm_mass.sum();
  return r;
}

// ---------------------------------------------------------------------------

Likelihood::Likelihood(MatchSample sample, BasisSpec spec, SolverOptions options)
    : sample_(std::move(sample)), spec_(std::move(spec)), options_(options) {
  spec_.check_dimensions(sample_.worker_dim(), sample_.firm_dim());
  types_ = TypeReduction::build(sample_);
  type_basis_ = basis_matrices(spec_, types_.worker_types, types_.firm_types);

  const int n = sample_.n();
  const int K = spec_.size();
  diag_basis_.resize(n, K);
  for (int i = 0; i < n; ++i) {
    diag_basis_.row(i) = eval_basis(spec_, sample_.worker(i), sample_.firm(i)).transpose();
  }
  // Each observation counts w_i / min_j w_j times: n under uniform weights, and a row of
  // doubled weight counts like two copies of it.
  count_weight_ = sample_.weights() / sample_.weights().minCoeff();
  total_count_ = count_weight_.sum();

  for (int i = 0; i < n; ++i) {
    if (sample_.transfers()[i]) observed_.push_back(i);
  }
  observed_values_.resize(static_cast<Eigen::Index>(observed_.size()));
  n_obs_eff_ = 0.0;
  for (std::size_t o = 0; o < observed_.size(); ++o) {
    observed_values_(o) = *sample_.transfers()[observed_[o]];
    n_obs_eff_ += count_weight_(observed_[o]);
  }
}

const SampleEquilibrium& Likelihood::equilibrium(const Vector& phi) {
  if (phi.size() != spec_.size()) throw ConfigError("Phi length differs from basis size");
  if (cache_ && cache_->phi_coef.size() == phi.size() && cache_->phi_coef == phi) return *cache_;

  SampleEquilibrium eq;
  eq.phi_coef = phi;
  eq.phi = Matrix::Zero(types_.n_worker_types(), types_.n_firm_types());
  for (int k = 0; k < spec_.size(); ++k) {
    if (phi(k) != 0.0) eq.phi += phi(k) * type_basis_[k];
  }
  if (!eq.phi.allFinite()) throw NumericError("phi overflowed on the type grid");

  const Potentials* warm = cache_ ? &cache_->pots : nullptr;
  eq.pots = solve_potentials(eq.phi, types_.worker_mass, types_.firm_mass, options_, warm);
  eq.density = matching_density(eq.phi, eq.pots);

  const int n = sample_.n();
  eq.a_obs.resize(n);
  eq.b_obs.resize(n);
  for (int i = 0; i < n; ++i) {
    eq.a_obs(i) = eq.pots.a(types_.worker_type_of[i]);
    eq.b_obs(i) = eq.pots.b(types_.firm_type_of[i]);
  }
  cache_ = std::move(eq);
  return *cache_;
}

double Likelihood::log_l1_value(const SampleEquilibrium& eq) const {
  const int n = sample_.n();
  // Neumaier summation: n terms of similar size, where plain accumulation loses digits.
  double total = 0.0, carry = 0.0;
  for (int i = 0; i < n; ++i) {
    const double phi_ii = eq.phi(types_.worker_type_of[i], types_.firm_type_of[i]);
    const double term = count_weight_(i) * (phi_ii - eq.a_obs(i) - eq.b_obs(i));
    const double next = total + term;
    carry += std::abs(total) >= std::abs(term) ? (total - next) + term : (term - next) + total;
    total = next;
  }
  return total + carry;
}

Vector Likelihood::observed_moments() const {
  return diag_basis_.transpose() * count_weight_;
}

Vector Likelihood::predicted_moments(const Vector& phi) {
  const auto& eq = equilibrium(phi);
  const Matrix pi = eq.density.pi();
  Vector m(spec_.size());
  for (int k = 0; k < spec_.size(); ++k) m(k) = total_count_ * pi.cwiseProduct(type_basis_[k]).sum();
  return m;
}

Vector Likelihood::log_l1_gradient(const SampleEquilibrium& eq) const {
  const Matrix pi = eq.density.pi();
  Vector g = diag_basis_.transpose() * count_weight_;
  for (int k = 0; k < spec_.size(); ++k) g(k) -= total_count_ * pi.cwiseProduct(type_basis_[k]).sum();
  return g;
}

Vector Likelihood::predicted_wages(const Theta& theta) {
  validate(theta, spec_);
  const auto& eq = equilibrium(theta.phi());
  const int n = sample_.n();
  Vector w(n);
  const Vector alpha = diag_basis_ * theta.A;
  const Vector gamma = diag_basis_ * theta.Gamma;
  for (int i = 0; i < n; ++i) {
    w(i) = theta.sigma1 * (gamma(i) - eq.b_obs(i)) + theta.sigma2 * (eq.a_obs(i) - alpha(i)) +
           theta.t;
  }
  return w;
}

namespace {

double binomial_terms(double n, double n_obs) {
  if (n_obs <= 0.0 || n_obs >= n) return 0.0;
  const double p = n_obs / n;
  return n_obs * std::log(p) + (n - n_obs) * std::log1p(-p);
}

}  // namespace

LikelihoodBreakdown Likelihood::evaluate(const Theta& theta) {
  const Vector w = predicted_wages(theta);
  const auto& eq = *cache_;

  LikelihoodBreakdown out;
  out.n_observed_transfers = static_cast<int>(observed_.size());
  out.logL1 = log_l1_value(eq);
  if (!observed_.empty()) {
    double ssr = 0.0;
    for (std::size_t o = 0; o < observed_.size(); ++o) {
      const int i = observed_[o];
      const double r = observed_values_(o) - w(i);
      ssr += count_weight_(i) * r * r;
    }
    out.logL2 = -ssr / (2.0 * theta.s2) - 0.5 * n_obs_eff_ * std::log(theta.s2);
  }
  out.binomial = binomial_terms(total_count_, n_obs_eff_);
  out.total = out.logL1 + out.logL2 + out.binomial;
  return out;
}

Vector Likelihood::gradient(const Theta& theta) {
  const Vector w = predicted_wages(theta);
  const auto& eq = *cache_;
  const int K = spec_.size();
  const Vector g1 = log_l1_gradient(eq);

  Vector grad = Vector::Zero(2 * K + 4);
  for (int k = 0; k < K; ++k) {
    if (spec_.alpha_mask()[k]) grad(k) = g1(k);
    if (spec_.gamma_mask()[k]) grad(K + k) = g1(k);
  }
  if (observed_.empty()) return grad;

  // Residuals weighted by observation counts.
  Vector cr = Vector::Zero(sample_.n());
  double ssr = 0.0;
  for (std::size_t o = 0; o < observed_.size(); ++o) {
    const int i = observed_[o];
    const double r = observed_values_(o) - w(i);
    cr(i) = count_weight_(i) * r;
    ssr += count_weight_(i) * r * r;
  }
  const double inv_s2 = 1.0 / theta.s2;

  const Vector alpha = diag_basis_ * theta.A;
  const Vector gamma = diag_basis_ * theta.Gamma;
  grad(2 * K) = inv_s2 * cr.dot(gamma - eq.b_obs);
  grad(2 * K + 1) = inv_s2 * cr.dot(eq.a_obs - alpha);
  grad(2 * K + 2) = inv_s2 * cr.sum();
  grad(2 * K + 3) = ssr / (2.0 * theta.s2 * theta.s2) - n_obs_eff_ / (2.0 * theta.s2);

  if (K == 0) return grad;

  const auto deriv =
      differentiate_potentials(type_basis_, eq.density, types_.worker_mass, types_.firm_mass);
  const int n = sample_.n();
  Matrix Da(n, K);
  Matrix Db(n, K);
  for (int i = 0; i < n; ++i) {
    Da.row(i) = deriv.Da.row(types_.worker_type_of[i]);
    Db.row(i) = deriv.Db.row(types_.firm_type_of[i]);
  }
  // dw/dA = sigma2 (Da - phi_k(ii)) - sigma1 Db ; dw/dGamma = sigma1 (phi_k(ii) - Db) + sigma2 Da
  const Matrix dA = theta.sigma2 * (Da - diag_basis_) - theta.sigma1 * Db;
  const Matrix dG = theta.sigma1 * (diag_basis_ - Db) + theta.sigma2 * Da;
  const Vector gA = inv_s2 * (dA.transpose() * cr);
  const Vector gG = inv_s2 * (dG.transpose() * cr);
  for (int k = 0; k < K; ++k) {
    if (spec_.alpha_mask()[k]) grad(k) += gA(k);
    if (spec_.gamma_mask()[k]) grad(K + k) += gG(k);
  }
  return grad;
}

ConcentratedResult Likelihood::concentrated(const Vector& A, const Vector& Gamma,
                                            bool with_gradient) {
  const int K = spec_.size();
  Theta theta = Theta::zeros(K);
  theta.A = A;
  theta.Gamma = Gamma;
  theta.sigma1 = 0.0;
  theta.sigma2 = 0.0;
  theta.s2 = 1.0;
  validate(theta, spec_);

  const auto& eq = equilibrium(theta.phi());
  ConcentratedResult out;
  out.breakdown.n_observed_transfers = static_cast<int>(observed_.size());
  out.breakdown.logL1 = log_l1_value(eq);
  out.breakdown.binomial = binomial_terms(total_count_, n_obs_eff_);

  if (observed_.empty()) {
    out.breakdown.total = out.breakdown.logL1 + out.breakdown.binomial;
    out.value = out.breakdown.total;
    if (with_gradient) {
      const Vector g1 = log_l1_gradient(eq);
      out.gradient = Vector::Zero(2 * K);
      for (int k = 0; k < K; ++k) {
        if (spec_.alpha_mask()[k]) out.gradient(k) = g1(k);
        if (spec_.gamma_mask()[k]) out.gradient(K + k) = g1(k);
      }
    }
    return out;
  }

  // Inner problem: weighted least squares of W on (gamma_ii - b_i, a_i - alpha_ii, 1).
  const auto m = static_cast<Eigen::Index>(observed_.size());
  const Vector alpha = diag_basis_ * A;
  const Vector gamma = diag_basis_ * Gamma;
  Matrix X(m, 3);
  Vector c(m);
  for (Eigen::Index o = 0; o < m; ++o) {
    const int i = observed_[o];
    X(o, 0) = gamma(i) - eq.b_obs(i);
    X(o, 1) = eq.a_obs(i) - alpha(i);
    X(o, 2) = 1.0;
    c(o) = count_weight_(i);
  }
  const Vector& W = observed_values_;

  const OlsFit full = ols(X, W, c);  // throws on collinear regressors
  double best_ssr = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best = Eigen::Vector3d::Zero();
  std::vector<bool> pinned = {false, false};
  auto consider = [&](const Eigen::Vector3d& coef, double ssr, bool p1, bool p2) {
    if (coef(0) < 0.0 || coef(1) < 0.0) return;
    if (ssr < best_ssr) {
      best_ssr = ssr;
      best = coef;
      pinned = {p1, p2};
    }
  };
  consider(full.coef, full.ssr, false, false);
  if (full.coef(0) < 0.0 || full.coef(1) < 0.0) {
    // Optimum lies on a face of the nonnegative orthant; refit on each face.
    for (int drop : {0, 1}) {
      const int keep = 1 - drop;
      Matrix Xf(m, 2);
      Xf.col(0) = X.col(keep);
      Xf.col(1) = X.col(2);
      const OlsFit f = ols(Xf, W, c);
      Eigen::Vector3d coef = Eigen::Vector3d::Zero();
      coef(keep) = f.coef(0);
      coef(2) = f.coef(1);
      consider(coef, f.ssr, drop == 0, drop == 1);
    }
    const OlsFit f = ols(X.col(2), W, c);
    consider(Eigen::Vector3d(0.0, 0.0, f.coef(0)), f.ssr, true, true);
  }

  Theta inner = theta;
  inner.sigma1 = best(0);
  inner.sigma2 = best(1);
  inner.t = best(2);
  double s2 = best_ssr / n_obs_eff_;
  if (s2 < 1e-12) {
    out.degenerate_fit = true;
    s2 = 1e-12;
  }
  inner.s2 = s2;
  out.on_boundary = pinned;

  const auto bd = evaluate(inner);
  out.breakdown = bd;
  out.value = bd.total;
  out.inner = inner;
  if (with_gradient) {
    const Vector g = gradient(inner);
    out.gradient = g.head(2 * K);
  }
  return out;
}

// ---------------------------------------------------------------------------

LikelihoodBreakdown log_likelihood(const Theta& theta, const BasisSpec& spec,
                                   const MatchSample& sample, const SolverOptions& options) {
  Likelihood lik(sample, spec, options);
  return lik.evaluate(theta);
}

Vector gradient(const Theta& theta, const BasisSpec& spec, const MatchSample& sample,
                const SolverOptions& options) {
  Likelihood lik(sample, spec, options);
  return lik.gradient(theta);
}

ConcentratedResult concentrated_log_likelihood(const Vector& A, const Vector& Gamma,
                                               const BasisSpec& spec, const MatchSample& sample,
                                               const SolverOptions& options) {
  Likelihood lik(sample, spec, options);
  return lik.concentrated(A, Gamma);
}

}  // namespace jobmatch
