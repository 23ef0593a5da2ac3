#include "jobmatch/estimator.hpp"

#include "jobmatch/error.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <limits>

namespace jobmatch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sigma_of(double u, Reparameterization r) {
  if (r == Reparameterization::Exp) return std::exp(u);
  return u > 30.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

double dsigma_du(double u, Reparameterization r) {
  if (r == Reparameterization::Exp) return std::exp(u);
  return 1.0 / (1.0 + std::exp(-u));
}

double u_of(double sigma, Reparameterization r) {
  sigma = std::max(sigma, 1e-300);
  if (r == Reparameterization::Exp) return std::log(sigma);
  return sigma > 30.0 ? sigma + std::log(-std::expm1(-sigma)) : std::log(std::expm1(sigma));
}

// Unconstrained coordinates of the full likelihood: free A, free Gamma, then u1, u2 for
// unpinned sigmas, then t and v = log s2.
class FullProblem {
 public:
  FullProblem(Likelihood& lik, Reparameterization reparam, std::vector<bool> pinned)
      : lik_(lik), reparam_(reparam), pinned_(std::move(pinned)) {
    const auto& spec = lik_.spec();
    K_ = spec.size();
    for (int k = 0; k < K_; ++k) {
      if (spec.alpha_mask()[k]) coef_.push_back(k);
    }
    for (int k = 0; k < K_; ++k) {
      if (spec.gamma_mask()[k]) coef_.push_back(K_ + k);
    }
  }

  int dim() const {
    return static_cast<int>(coef_.size()) + !pinned_[0] + !pinned_[1] + 2;
  }

  Vector to_z(const Theta& th) const {
    const Vector nat = th.to_vector();
    Vector z(dim());
    int p = 0;
    for (int idx : coef_) z(p++) = nat(idx);
    if (!pinned_[0]) z(p++) = u_of(th.sigma1, reparam_);
    if (!pinned_[1]) z(p++) = u_of(th.sigma2, reparam_);
    z(p++) = th.t;
    z(p++) = std::log(th.s2);
    return z;
  }

  Theta from_z(const Vector& z) const {
    Vector nat = Vector::Zero(2 * K_ + 4);
    int p = 0;
    for (int idx : coef_) nat(idx) = z(p++);
    nat(2 * K_) = pinned_[0] ? 0.0 : sigma_of(z(p++), reparam_);
    nat(2 * K_ + 1) = pinned_[1] ? 0.0 : sigma_of(z(p++), reparam_);
    nat(2 * K_ + 2) = z(p++);
    nat(2 * K_ + 3) = std::exp(z(p++));
    return Theta::from_vector(nat);
  }

  // Natural gradient restricted to the free coordinates, in z order.
  Vector free_natural(const Vector& nat_grad) const {
    Vector g(dim());
    int p = 0;
    for (int idx : coef_) g(p++) = nat_grad(idx);
    if (!pinned_[0]) g(p++) = nat_grad(2 * K_);
    if (!pinned_[1]) g(p++) = nat_grad(2 * K_ + 1);
    g(p++) = nat_grad(2 * K_ + 2);
    g(p++) = nat_grad(2 * K_ + 3);
    return g;
  }

  // Chain rule factors d natural / d z in z order.
  Vector jacobian(const Vector& z) const {
    Vector J = Vector::Ones(dim());
    int p = static_cast<int>(coef_.size());
    if (!pinned_[0]) { J(p) = dsigma_du(z(p), reparam_); ++p; }
    if (!pinned_[1]) { J(p) = dsigma_du(z(p), reparam_); ++p; }
    ++p;
    J(p) = std::exp(z(p));
    return J;
  }

  double objective(const Vector& z, Vector& gz) {
    const Theta th = from_z(z);
    const double f = -lik_.evaluate(th).total;
    last_natural_ = lik_.gradient(th);
    gz = -free_natural(last_natural_).cwiseProduct(jacobian(z));
    return f;
  }

  bool converged(const Vector& z, const Vector& gz, double tol) const {
    const Vector nat = gz.cwiseQuotient(jacobian(z));
    return nat.lpNorm<Eigen::Infinity>() <= tol;
  }

  double natural_norm(const Vector& z, const Vector& gz) const {
    if (gz.size() == 0) return 0.0;
    return gz.cwiseQuotient(jacobian(z)).lpNorm<Eigen::Infinity>();
  }

 private:
  Likelihood& lik_;
  Reparameterization reparam_;
  std::vector<bool> pinned_;
  int K_ = 0;
  std::vector<int> coef_;
  Vector last_natural_;
};

struct FullFit {
  Theta theta;
  LikelihoodBreakdown loglik;
  OptimizerResult opt;
  double grad_norm = 0.0;
  std::vector<bool> pinned;
};

FullFit run_full(Likelihood& lik, const EstimatorOptions& options, std::vector<bool> pinned,
                 Theta start) {
  if (pinned[0]) start.sigma1 = 0.0;
  if (pinned[1]) start.sigma2 = 0.0;
  FullProblem problem(lik, options.reparam, pinned);
  const double tol = options.optimizer.grad_tol;
  auto obj = [&](const Vector& z, Vector& g) { return problem.objective(z, g); };
  auto conv = [&](const Vector& z, const Vector& g) { return problem.converged(z, g, tol); };
  FullFit fit;
  fit.opt = minimize_bfgs(obj, problem.to_z(start), options.optimizer, conv);
  fit.theta = problem.from_z(fit.opt.x);
  fit.loglik = lik.evaluate(fit.theta);
  fit.grad_norm = problem.natural_norm(fit.opt.x, fit.opt.grad);
  fit.pinned = std::move(pinned);
  return fit;
}

Theta default_start(const MatchSample& sample, const BasisSpec& spec) {
  Theta th = Theta::zeros(spec.size());
  th.sigma1 = 0.25;
  th.sigma2 = 0.25;
  double wsum = 0.0, mean = 0.0;
  for (int i = 0; i < sample.n(); ++i) {
    if (!sample.transfers()[i]) continue;
    wsum += sample.weights()(i);
    mean += sample.weights()(i) * *sample.transfers()[i];
  }
  if (wsum > 0.0) mean /= wsum;
  double var = 0.0;
  for (int i = 0; i < sample.n(); ++i) {
    if (!sample.transfers()[i]) continue;
    const double r = *sample.transfers()[i] - mean;
    var += sample.weights()(i) * r * r;
  }
  if (wsum > 0.0) var /= wsum;
  th.t = mean;
  th.s2 = var > 0.0 ? var : 1.0;
  return th;
}

void check_sample_size(const MatchSample& sample, const BasisSpec& spec) {
  if (sample.n() < spec.size() + 4) {
    throw ConfigError("estimation needs n >= K + 4 (n = " + std::to_string(sample.n()) +
                      ", K = " + std::to_string(spec.size()) + ")");
  }
}

Vector phi_standard_errors(const Matrix& cov, const std::vector<bool>& present, int K) {
  Vector se = Vector::Constant(K, kNaN);
  if (cov.size() == 0) return se;
  for (int k = 0; k < K; ++k) {
    std::vector<int> idx;
    if (present[k]) idx.push_back(k);
    if (present[K + k]) idx.push_back(K + k);
    if (idx.empty()) continue;
    double var = 0.0;
    for (int a : idx) {
      for (int b : idx) var += cov(a, b);
    }
    se(k) = var >= 0.0 ? std::sqrt(var) : kNaN;
  }
  return se;
}

void fill_convergence(EstimationReport& rep, const OptimizerResult& opt, double grad_norm,
                      double tol) {
  rep.convergence.iterations = opt.iterations;
  rep.convergence.evaluations = opt.evaluations;
  rep.convergence.grad_norm = grad_norm;
  rep.convergence.converged = grad_norm <= tol;
  rep.convergence.status = rep.convergence.converged ? "converged" : "not converged: " + opt.status;
  rep.convergence.history.clear();
  for (double f : opt.history) rep.convergence.history.push_back(-f);
}

void attach_std_errors(EstimationReport& rep, Likelihood& lik, const EstimatorOptions& options) {
  const int K = lik.spec().size();
  rep.std_errors = Vector::Constant(2 * K + 4, kNaN);
  rep.std_error_present.assign(2 * K + 4, false);
  rep.phi_std_errors = Vector::Constant(K, kNaN);
  if (!options.compute_std_errors) {
    rep.std_error_status = "not requested";
    return;
  }
  const auto se = standard_errors(rep.theta_hat, lik.sample(), lik.spec(), options,
                                  rep.sigma_on_boundary);
  rep.std_error_status = se.status;
  if (!se.ok) {
    rep.warnings.push_back("standard errors unavailable: " + se.status);
    return;
  }
  rep.std_errors = se.std_errors;
  rep.std_error_present = se.present;
  rep.covariance = se.covariance;
  rep.phi_std_errors = phi_standard_errors(se.covariance, se.present, K);
}

// Maximizes logL1 over Phi on bases that interact x and y; the rest are absorbed by the
// potentials and stay unidentified.
EstimationReport estimate_matching_only(Likelihood& lik, const EstimatorOptions& options,
                                        EstimationMethod method) {
  const auto& spec = lik.spec();
  const int K = spec.size();
  std::vector<int> free;
  for (int k = 0; k < K; ++k) {
    if (spec.interacts(k)) free.push_back(k);
  }
  const auto nf = static_cast<Eigen::Index>(free.size());

  auto expand = [&](const Vector& z) {
    Vector phi = Vector::Zero(K);
    for (Eigen::Index p = 0; p < nf; ++p) phi(free[p]) = z(p);
    return phi;
  };
  auto as_theta = [&](const Vector& phi) {
    Theta th = Theta::zeros(K);
    for (int k = 0; k < K; ++k) {
      if (spec.alpha_mask()[k]) th.A(k) = phi(k);
      else th.Gamma(k) = phi(k);
    }
    return th;
  };
  auto phi_gradient = [&](const Vector& phi) {
    const Vector g = lik.gradient(as_theta(phi));
    Vector out(K);
    for (int k = 0; k < K; ++k) out(k) = spec.alpha_mask()[k] ? g(k) : g(K + k);
    return out;
  };
  auto obj = [&](const Vector& z, Vector& g) {
    const Vector phi = expand(z);
    const double f = -lik.evaluate(as_theta(phi)).total;
    const Vector full = phi_gradient(phi);
    g.resize(nf);
    for (Eigen::Index p = 0; p < nf; ++p) g(p) = -full(free[p]);
    return f;
  };

  EstimationReport rep;
  rep.method = EstimationMethod::MatchingOnly;
  rep.options = options;
  rep.n = lik.sample().n();
  rep.n_observed = 0;
  rep.split_identified = false;
  rep.phi_identified.assign(K, false);
  for (int k : free) rep.phi_identified[k] = true;
  rep.warnings.push_back("no transfers observed: only Phi on interaction bases is identified; "
                         "the A/Gamma split, sigma1, sigma2, t and s2 are not");
  if (method == EstimationMethod::Concentrated) {
    rep.warnings.push_back("concentrated estimation reduced to matching-only estimation");
  }

  const auto opt = minimize_bfgs(obj, Vector::Zero(nf), options.optimizer);
  rep.phi_hat = expand(opt.x);
  rep.loglik = lik.evaluate(as_theta(rep.phi_hat));
  fill_convergence(rep, opt, opt.grad.size() ? opt.grad.lpNorm<Eigen::Infinity>() : 0.0,
                   options.optimizer.grad_tol);

  rep.theta_hat = Theta::zeros(K);
  for (int k = 0; k < K; ++k) {
    if (spec.shared(k)) {
      rep.theta_hat.A(k) = 0.5 * rep.phi_hat(k);
      rep.theta_hat.Gamma(k) = 0.5 * rep.phi_hat(k);
    } else if (spec.alpha_mask()[k]) {
      rep.theta_hat.A(k) = rep.phi_hat(k);
    } else {
      rep.theta_hat.Gamma(k) = rep.phi_hat(k);
    }
  }
  rep.theta_hat.sigma1 = kNaN;
  rep.theta_hat.sigma2 = kNaN;
  rep.theta_hat.t = kNaN;
  rep.theta_hat.s2 = kNaN;
  rep.r_squared = kNaN;

  rep.std_errors = Vector::Constant(2 * K + 4, kNaN);
  rep.std_error_present.assign(2 * K + 4, false);
  rep.phi_std_errors = Vector::Constant(K, kNaN);
  if (!options.compute_std_errors) {
    rep.std_error_status = "not requested";
    return rep;
  }
  std::vector<bool> present(K, false);
  for (int k : free) present[k] = true;
  const auto se = hessian_standard_errors(phi_gradient, rep.phi_hat, present,
                                          options.hessian_step);
  rep.std_error_status = se.status;
  if (se.ok) {
    rep.phi_std_errors = se.std_errors;
  } else {
    rep.warnings.push_back("standard errors unavailable: " + se.status);
  }
  return rep;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Reparameterization r) {
  return r == Reparameterization::Exp ? "exp" : "softplus";
}

Reparameterization reparameterization_from_string(const std::string& s) {
  if (s == "exp") return Reparameterization::Exp;
  if (s == "softplus") return Reparameterization::Softplus;
  throw ConfigError("unknown reparameterization '" + s + "' (expected exp or softplus)");
}

std::string to_string(EstimationMethod m) {
  switch (m) {
    case EstimationMethod::Full: return "full";
    case EstimationMethod::Concentrated: return "concentrated";
    case EstimationMethod::MatchingOnly: return "matching-only";
  }
  return "unknown";
}

double transfer_r_squared(const MatchSample& sample, const Vector& predicted) {
  double wsum = 0.0, mean = 0.0;
  for (int i = 0; i < sample.n(); ++i) {
    if (!sample.transfers()[i]) continue;
    wsum += sample.weights()(i);
    mean += sample.weights()(i) * *sample.transfers()[i];
  }
  if (wsum == 0.0) return kNaN;
  mean /= wsum;
  double ssr = 0.0, sst = 0.0;
  for (int i = 0; i < sample.n(); ++i) {
    if (!sample.transfers()[i]) continue;
    const double w = sample.weights()(i);
    const double W = *sample.transfers()[i];
    ssr += w * (W - predicted(i)) * (W - predicted(i));
    sst += w * (W - mean) * (W - mean);
  }
  return sst > 0.0 ? 1.0 - ssr / sst : kNaN;
}

StdErrorResult hessian_standard_errors(const GradientFunction& grad, const Vector& x,
                                       const std::vector<bool>& free, double step) {
  const auto dim = x.size();
  if (static_cast<Eigen::Index>(free.size()) != dim) {
    throw ConfigError("free mask length differs from the parameter vector");
  }
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (free[i]) idx.push_back(static_cast<int>(i));
  }
  const auto m = static_cast<Eigen::Index>(idx.size());

  StdErrorResult out;
  out.present.assign(dim, false);
  out.std_errors = Vector::Constant(dim, kNaN);
  out.covariance = Matrix::Constant(dim, dim, kNaN);
  if (m == 0) {
    out.ok = true;
    out.status = "no free coordinates";
    return out;
  }

  Matrix H(m, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const int j = idx[c];
    const double h = step * std::max(1.0, std::abs(x(j)));
    Vector xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    const Vector gp = grad(xp);
    const Vector gm = grad(xm);
    for (Eigen::Index r = 0; r < m; ++r) H(r, c) = (gp(idx[r]) - gm(idx[r])) / (2.0 * h);
  }
  const Matrix info = -0.5 * (H + H.transpose());
  Eigen::LLT<Matrix> llt(info);
  if (llt.info() != Eigen::Success || !info.allFinite()) {
    out.status = "observed information is not positive definite";
    return out;
  }
  const Matrix cov = llt.solve(Matrix::Identity(m, m));
  for (Eigen::Index r = 0; r < m; ++r) {
    out.present[idx[r]] = true;
    out.std_errors(idx[r]) = std::sqrt(cov(r, r));
    for (Eigen::Index c = 0; c < m; ++c) out.covariance(idx[r], idx[c]) = cov(r, c);
  }
  out.ok = true;
  out.status = "ok";
  return out;
}

StdErrorResult standard_errors(const Theta& theta_hat, const MatchSample& sample,
                               const BasisSpec& spec, const EstimatorOptions& options,
                               std::vector<bool> pinned) {
  validate(theta_hat, spec);
  if (pinned.size() != 2) throw ConfigError("pinned mask must have two entries");
  const int K = spec.size();
  Likelihood lik(sample, spec, options.solver);
  std::vector<bool> free(2 * K + 4, false);
  for (int k = 0; k < K; ++k) {
    free[k] = spec.alpha_mask()[k];
    free[K + k] = spec.gamma_mask()[k];
  }
  free[2 * K] = !pinned[0];
  free[2 * K + 1] = !pinned[1];
  free[2 * K + 2] = true;
  free[2 * K + 3] = true;
  if (sample.n_observed() == 0) {
    throw ConfigError("standard errors of theta need observed transfers");
  }

  Vector x = theta_hat.to_vector();
  // Keep the finite-difference stencil inside sigma >= 0 and s2 > 0.
  const double base = options.hessian_step;
  auto grad = [&](const Vector& v) {
    Vector w = v;
    return lik.gradient(Theta::from_vector(w));
  };
  for (int j : {2 * K, 2 * K + 1, 2 * K + 3}) {
    if (!free[j]) continue;
    if (x(j) <= 0.0) {
      StdErrorResult out;
      out.status = parameter_name(spec, j) + " is on the boundary; pin it";
      out.present.assign(2 * K + 4, false);
      out.std_errors = Vector::Constant(2 * K + 4, kNaN);
      return out;
    }
  }
  double step = base;
  for (int j : {2 * K, 2 * K + 1, 2 * K + 3}) {
    if (free[j]) step = std::min(step, 0.5 * x(j) / std::max(1.0, std::abs(x(j))));
  }
  return hessian_standard_errors(grad, x, free, step);
}

LikelihoodRatioTest likelihood_ratio_test(double loglik_unrestricted, double loglik_restricted,
                                          int df) {
  if (df <= 0) throw ConfigError("likelihood ratio test needs df > 0");
  LikelihoodRatioTest out;
  out.df = df;
  out.statistic = std::max(0.0, 2.0 * (loglik_unrestricted - loglik_restricted));
  boost::math::chi_squared dist(df);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

// ---------------------------------------------------------------------------

EstimationReport estimate(const MatchSample& sample, const BasisSpec& spec,
                          const EstimatorOptions& options) {
  check_sample_size(sample, spec);
  Likelihood lik(sample, spec, options.solver);
  if (sample.n_observed() == 0) {
    return estimate_matching_only(lik, options, EstimationMethod::Full);
  }

  const Theta start = options.initial ? *options.initial : default_start(sample, spec);
  validate(start, spec);
  const int K = spec.size();

  FullFit best = run_full(lik, options, {false, false}, start);
  // Boundary handling: a sigma driven toward zero is refit with the coordinate pinned.
  for (int round = 0; round < 2; ++round) {
    const Vector g = lik.gradient(best.theta);
    bool changed = false;
    for (int s = 0; s < 2; ++s) {
      if (best.pinned[s]) continue;
      const double sigma = s == 0 ? best.theta.sigma1 : best.theta.sigma2;
      const bool tiny = sigma < options.boundary_tol;
      const bool pushed = sigma < options.boundary_probe && g(2 * K + s) < 0.0;
      if (!tiny && !pushed) continue;
      std::vector<bool> pinned = best.pinned;
      pinned[s] = true;
      FullFit refit = run_full(lik, options, pinned, best.theta);
      const double slack = 1e-9 * std::max(1.0, std::abs(best.loglik.total));
      if (tiny || refit.loglik.total >= best.loglik.total - slack) {
        best = std::move(refit);
        changed = true;
      }
    }
    if (!changed) break;
  }

  EstimationReport rep;
  rep.method = EstimationMethod::Full;
  rep.options = options;
  rep.n = sample.n();
  rep.n_observed = sample.n_observed();
  rep.theta_hat = best.theta;
  rep.phi_hat = best.theta.phi();
  rep.loglik = best.loglik;
  rep.sigma_on_boundary = best.pinned;
  rep.phi_identified.assign(K, true);
  fill_convergence(rep, best.opt, best.grad_norm, options.optimizer.grad_tol);
  rep.r_squared = transfer_r_squared(sample, lik.predicted_wages(best.theta));
  attach_std_errors(rep, lik, options);
  return rep;
}

EstimationReport estimate_concentrated(const MatchSample& sample, const BasisSpec& spec,
                                       const EstimatorOptions& options) {
  check_sample_size(sample, spec);
  Likelihood lik(sample, spec, options.solver);
  if (sample.n_observed() == 0) {
    return estimate_matching_only(lik, options, EstimationMethod::Concentrated);
  }
  const int K = spec.size();
  std::vector<int> coef;
  for (int k = 0; k < K; ++k) {
    if (spec.alpha_mask()[k]) coef.push_back(k);
  }
  for (int k = 0; k < K; ++k) {
    if (spec.gamma_mask()[k]) coef.push_back(K + k);
  }
  const auto nc = static_cast<Eigen::Index>(coef.size());

  auto split = [&](const Vector& z) {
    Vector A = Vector::Zero(K), G = Vector::Zero(K);
    for (Eigen::Index p = 0; p < nc; ++p) {
      if (coef[p] < K) A(coef[p]) = z(p);
      else G(coef[p] - K) = z(p);
    }
    return std::pair{A, G};
  };
  auto obj = [&](const Vector& z, Vector& g) {
    const auto [A, G] = split(z);
    const auto res = lik.concentrated(A, G, true);
    g.resize(nc);
    for (Eigen::Index p = 0; p < nc; ++p) g(p) = -res.gradient(coef[p]);
    return -res.value;
  };

  Vector z0 = Vector::Zero(nc);
  if (options.initial) {
    const Vector nat = options.initial->to_vector();
    for (Eigen::Index p = 0; p < nc; ++p) z0(p) = nat(coef[p]);
  }
  const auto opt = minimize_bfgs(obj, z0, options.optimizer);
  const auto [A, G] = split(opt.x);
  const auto res = lik.concentrated(A, G, true);

  EstimationReport rep;
  rep.method = EstimationMethod::Concentrated;
  rep.options = options;
  rep.n = sample.n();
  rep.n_observed = sample.n_observed();
  rep.theta_hat = *res.inner;
  rep.phi_hat = rep.theta_hat.phi();
  rep.loglik = res.breakdown;
  rep.sigma_on_boundary = res.on_boundary;
  rep.phi_identified.assign(K, true);
  if (res.degenerate_fit) rep.warnings.push_back("transfers fitted exactly; s2 floored at 1e-12");
  fill_convergence(rep, opt, nc ? opt.grad.lpNorm<Eigen::Infinity>() : 0.0,
                   options.optimizer.grad_tol);
  rep.r_squared = transfer_r_squared(sample, lik.predicted_wages(rep.theta_hat));
  attach_std_errors(rep, lik, options);
  return rep;
}

}  // namespace jobmatch
