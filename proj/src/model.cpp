#include "jobmatch/model.hpp"

#include "jobmatch/error.hpp"

#include <cmath>
#include <sstream>

namespace jobmatch {

MatchSample::MatchSample(RowMatrix workers, RowMatrix firms, Transfers transfers, Vector weights)
    : workers_(std::move(workers)),
      firms_(std::move(firms)),
      transfers_(std::move(transfers)),
      weights_(std::move(weights)) {
  const auto n = workers_.rows();
  if (n < 1) throw ConfigError("sample must contain at least one match");
  if (firms_.rows() != n) {
    throw ConfigError("workers and firms must have the same number of rows");
  }
  if (!workers_.allFinite() || !firms_.allFinite()) {
    throw ConfigError("covariates must be finite");
  }
  if (transfers_.empty()) transfers_.assign(n, std::nullopt);
  if (static_cast<Eigen::Index>(transfers_.size()) != n) {
    throw ConfigError("transfer vector length differs from the number of matches");
  }
  for (const auto& w : transfers_) {
    if (w && !std::isfinite(*w)) throw ConfigError("observed transfers must be finite");
  }
  if (weights_.size() == 0) weights_ = Vector::Constant(n, 1.0 / static_cast<double>(n));
  if (weights_.size() != n) throw ConfigError("weight vector length differs from n");
  if ((weights_.array() <= 0.0).any() || !weights_.allFinite()) {
    throw ConfigError("weights must be positive");
  }
  if (std::abs(weights_.sum() - 1.0) > 1e-12) throw ConfigError("weights must sum to 1");
}

std::span<const double> MatchSample::worker(int i) const {
  return {workers_.data() + static_cast<std::ptrdiff_t>(i) * workers_.cols(),
          static_cast<std::size_t>(workers_.cols())};
}

std::span<const double> MatchSample::firm(int j) const {
  return {firms_.data() + static_cast<std::ptrdiff_t>(j) * firms_.cols(),
          static_cast<std::size_t>(firms_.cols())};
}

int MatchSample::n_observed() const {
  int count = 0;
  for (const auto& w : transfers_) count += w.has_value();
  return count;
}

bool MatchSample::has_uniform_weights() const {
  const double target = 1.0 / static_cast<double>(n());
  return (weights_.array() == target).all();
}

MatchSample MatchSample::with_transfers(Transfers transfers) const {
  return MatchSample(workers_, firms_, std::move(transfers), weights_);
}

MatchSample MatchSample::with_firms(RowMatrix firms) const {
  return MatchSample(workers_, std::move(firms), transfers_, weights_);
}

// ---------------------------------------------------------------------------

BasisFunction BasisFunction::product(int worker_index, int firm_index) {
  if (worker_index < 0 || firm_index < 0) {
    throw ConfigError("basis indices must be nonnegative");
  }
  BasisFunction f;
  f.worker_index_ = worker_index;
  f.firm_index_ = firm_index;
  return f;
}

BasisFunction BasisFunction::custom(std::string label, Callable fn, bool depends_on_x,
                                    bool depends_on_y) {
  if (!fn) throw ConfigError("custom basis '" + label + "' has no callable");
  BasisFunction f;
  f.label_ = std::move(label);
  f.fn_ = std::move(fn);
  f.custom_x_ = depends_on_x;
  f.custom_y_ = depends_on_y;
  return f;
}

double BasisFunction::operator()(std::span<const double> x, std::span<const double> y) const {
  if (fn_) return fn_(x, y);
  if (static_cast<std::size_t>(worker_index_) > x.size() ||
      static_cast<std::size_t>(firm_index_) > y.size()) {
    throw ConfigError("basis " + name() + " indexes past the covariate vectors");
  }
  const double xv = worker_index_ == 0 ? 1.0 : x[worker_index_ - 1];
  const double yv = firm_index_ == 0 ? 1.0 : y[firm_index_ - 1];
  return xv * yv;
}

bool BasisFunction::depends_on_x() const { return fn_ ? custom_x_ : worker_index_ != 0; }
bool BasisFunction::depends_on_y() const { return fn_ ? custom_y_ : firm_index_ != 0; }

std::string BasisFunction::name() const {
  if (fn_) return label_;
  if (worker_index_ == 0 && firm_index_ == 0) return "1";
  if (worker_index_ == 0) return "y" + std::to_string(firm_index_);
  if (firm_index_ == 0) return "x" + std::to_string(worker_index_);
  return "x" + std::to_string(worker_index_) + "*y" + std::to_string(firm_index_);
}

bool BasisFunction::operator==(const BasisFunction& other) const {
  if (is_custom() != other.is_custom()) return false;
  if (is_custom()) return label_ == other.label_;
  return worker_index_ == other.worker_index_ && firm_index_ == other.firm_index_;
}

// ---------------------------------------------------------------------------

BasisSpec::BasisSpec(std::vector<BasisFunction> functions, std::vector<bool> alpha_mask,
                     std::vector<bool> gamma_mask)
    : functions_(std::move(functions)),
      alpha_mask_(std::move(alpha_mask)),
      gamma_mask_(std::move(gamma_mask)) {
  const auto K = functions_.size();
  if (alpha_mask_.size() != K || gamma_mask_.size() != K) {
    throw ConfigError("basis masks must have one entry per basis function");
  }
  for (std::size_t k = 0; k < K; ++k) {
    const auto& f = functions_[k];
    if (!alpha_mask_[k] && !gamma_mask_[k]) {
      throw ConfigError("basis " + f.name() + " enters neither alpha nor gamma");
    }
    // alpha is only identified up to worker fixed effects, gamma up to firm fixed effects.
    if (alpha_mask_[k] && !f.depends_on_y()) {
      throw ConfigError("basis " + f.name() +
                        " does not vary with firm type and cannot enter alpha");
    }
    if (gamma_mask_[k] && !f.depends_on_x()) {
      throw ConfigError("basis " + f.name() +
                        " does not vary with worker type and cannot enter gamma");
    }
    for (std::size_t l = 0; l < k; ++l) {
      if (functions_[l] == f) throw ConfigError("duplicate basis " + f.name());
    }
  }
}

void BasisSpec::check_dimensions(int worker_dim, int firm_dim) const {
  for (const auto& f : functions_) {
    if (f.is_custom()) continue;
    if (f.worker_index() > worker_dim || f.firm_index() > firm_dim) {
      std::ostringstream os;
      os << "basis " << f.name() << " needs " << f.worker_index() << " worker and "
         << f.firm_index() << " firm covariates, data has " << worker_dim << " and " << firm_dim;
      throw ConfigError(os.str());
    }
  }
}

// ---------------------------------------------------------------------------

Vector Theta::to_vector() const {
  const int K = this->K();
  Vector v(2 * K + 4);
  v.head(K) = A;
  v.segment(K, K) = Gamma;
  v(2 * K) = sigma1;
  v(2 * K + 1) = sigma2;
  v(2 * K + 2) = t;
  v(2 * K + 3) = s2;
  return v;
}

Theta Theta::from_vector(const Vector& v) {
  if (v.size() < 4 || v.size() % 2 != 0) throw ConfigError("bad parameter vector length");
  const auto K = (v.size() - 4) / 2;
  Theta th;
  th.A = v.head(K);
  th.Gamma = v.segment(K, K);
  th.sigma1 = v(2 * K);
  th.sigma2 = v(2 * K + 1);
  th.t = v(2 * K + 2);
  th.s2 = v(2 * K + 3);
  return th;
}

Theta Theta::zeros(int K) {
  Theta th;
  th.A = Vector::Zero(K);
  th.Gamma = Vector::Zero(K);
  return th;
}

std::string parameter_name(const BasisSpec& spec, int flat_index) {
  const int K = spec.size();
  if (flat_index < K) return "A[" + spec.function(flat_index).name() + "]";
  if (flat_index < 2 * K) return "Gamma[" + spec.function(flat_index - K).name() + "]";
  switch (flat_index - 2 * K) {
    case 0: return "sigma1";
    case 1: return "sigma2";
    case 2: return "t";
    case 3: return "s2";
    default: throw ConfigError("parameter index out of range");
  }
}

void validate(const Theta& theta, const BasisSpec& spec) {
  const int K = spec.size();
  if (theta.A.size() != K || theta.Gamma.size() != K) {
    throw ConfigError("theta has " + std::to_string(theta.A.size()) +
                      " coefficients, basis has " + std::to_string(K));
  }
  for (int k = 0; k < K; ++k) {
    if (!spec.alpha_mask()[k] && theta.A(k) != 0.0) {
      throw ConfigError("A is masked for basis " + spec.function(k).name());
    }
    if (!spec.gamma_mask()[k] && theta.Gamma(k) != 0.0) {
      throw ConfigError("Gamma is masked for basis " + spec.function(k).name());
    }
  }
  if (!(theta.sigma1 >= 0.0) || !(theta.sigma2 >= 0.0)) {
    throw ConfigError("sigma1 and sigma2 must be nonnegative");
  }
  if (!(theta.s2 > 0.0)) throw ConfigError("s2 must be positive");
  if (!std::isfinite(theta.t)) throw ConfigError("t must be finite");
}

// ---------------------------------------------------------------------------

Vector eval_basis(const BasisSpec& spec, std::span<const double> x, std::span<const double> y) {
  Vector out(spec.size());
  for (int k = 0; k < spec.size(); ++k) out(k) = spec.function(k)(x, y);
  return out;
}

double alpha_value(const Theta& theta, const BasisSpec& spec, std::span<const double> x,
                   std::span<const double> y) {
  double v = 0.0;
  for (int k = 0; k < spec.size(); ++k) {
    if (spec.alpha_mask()[k] && theta.A(k) != 0.0) v += theta.A(k) * spec.function(k)(x, y);
  }
  return v;
}

double gamma_value(const Theta& theta, const BasisSpec& spec, std::span<const double> x,
                   std::span<const double> y) {
  double v = 0.0;
  for (int k = 0; k < spec.size(); ++k) {
    if (spec.gamma_mask()[k] && theta.Gamma(k) != 0.0) {
      v += theta.Gamma(k) * spec.function(k)(x, y);
    }
  }
  return v;
}

double phi_value(const Vector& phi, const BasisSpec& spec, std::span<const double> x,
                 std::span<const double> y) {
  double v = 0.0;
  for (int k = 0; k < spec.size(); ++k) v += phi(k) * spec.function(k)(x, y);
  return v;
}

namespace {

std::span<const double> row_span(const RowMatrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

Matrix phi_matrix(const Vector& phi, const BasisSpec& spec, const RowMatrix& workers,
                  const RowMatrix& firms) {
  spec.check_dimensions(static_cast<int>(workers.cols()), static_cast<int>(firms.cols()));
  if (phi.size() != spec.size()) throw ConfigError("Phi length differs from basis size");
  const auto R = workers.rows();
  const auto C = firms.rows();
  Matrix out = Matrix::Zero(R, C);
  for (int k = 0; k < spec.size(); ++k) {
    if (phi(k) == 0.0) continue;
    const auto& f = spec.function(k);
    for (Eigen::Index j = 0; j < C; ++j) {
      const auto y = row_span(firms, j);
      for (Eigen::Index i = 0; i < R; ++i) {
        const double v = phi(k) * f(row_span(workers, i), y);
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "non-finite phi at (i=" << i << ", j=" << j << ", k=" << k << ")";
          throw NumericError(os.str());
        }
        out(i, j) += v;
      }
    }
  }
  if (!out.allFinite()) {
    for (Eigen::Index j = 0; j < C; ++j) {
      for (Eigen::Index i = 0; i < R; ++i) {
        if (!std::isfinite(out(i, j))) {
          std::ostringstream os;
          os << "non-finite phi at (i=" << i << ", j=" << j << ", k=" << spec.size() - 1 << ")";
          throw NumericError(os.str());
        }
      }
    }
  }
  return out;
}

Matrix phi_matrix(const Theta& theta, const BasisSpec& spec, const MatchSample& sample) {
  return phi_matrix(theta.phi(), spec, sample.workers(), sample.firms());
}

std::vector<Matrix> basis_matrices(const BasisSpec& spec, const RowMatrix& workers,
                                   const RowMatrix& firms) {
  spec.check_dimensions(static_cast<int>(workers.cols()), static_cast<int>(firms.cols()));
  std::vector<Matrix> out;
  out.reserve(spec.size());
  for (const auto& f : spec.functions()) {
    Matrix m(workers.rows(), firms.rows());
    for (Eigen::Index j = 0; j < firms.rows(); ++j) {
      const auto y = row_span(firms, j);
      for (Eigen::Index i = 0; i < workers.rows(); ++i) m(i, j) = f(row_span(workers, i), y);
    }
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------

double Standardization::raw_slope(const BasisFunction& f, double coefficient) const {
  if (f.is_custom()) return coefficient;
  double scale = 1.0;
  if (f.worker_index() > 0 && worker_applied.at(f.worker_index() - 1)) {
    scale *= worker_scale(f.worker_index() - 1);
  }
  if (f.firm_index() > 0 && firm_applied.at(f.firm_index() - 1)) {
    scale *= firm_scale(f.firm_index() - 1);
  }
  return coefficient / scale;
}

namespace {

void zscore(RowMatrix& m, const std::vector<int>& columns, Vector& mean, Vector& scale,
            std::vector<bool>& applied) {
  mean = Vector::Zero(m.cols());
  scale = Vector::Ones(m.cols());
  applied.assign(m.cols(), false);
  for (int c : columns) {
    if (c < 0 || c >= m.cols()) throw ConfigError("standardization column out of range");
    const double mu = m.col(c).mean();
    const double var = (m.col(c).array() - mu).square().mean();
    if (!(var > 0.0)) throw ConfigError("cannot standardize a constant column");
    mean(c) = mu;
    scale(c) = std::sqrt(var);
    m.col(c) = (m.col(c).array() - mu) / scale(c);
    applied[c] = true;
  }
}

}  // namespace

std::pair<MatchSample, Standardization> standardize(const MatchSample& sample,
                                                    const std::vector<int>& worker_columns,
                                                    const std::vector<int>& firm_columns) {
  Standardization rec;
  RowMatrix workers = sample.workers();
  RowMatrix firms = sample.firms();
  zscore(workers, worker_columns, rec.worker_mean, rec.worker_scale, rec.worker_applied);
  zscore(firms, firm_columns, rec.firm_mean, rec.firm_scale, rec.firm_applied);
  return {MatchSample(std::move(workers), std::move(firms), sample.transfers(), sample.weights()),
          std::move(rec)};
}

}  // namespace jobmatch
