#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace jobmatch {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Transfers = std::vector<std::optional<double>>;

// Observed matches: row i of `workers` is matched with row i of `firms`.
class MatchSample {
 public:
  MatchSample() = default;
  // Empty `transfers` means every transfer is missing; empty `weights` means 1/n each.
  MatchSample(RowMatrix workers, RowMatrix firms, Transfers transfers = {}, Vector weights = {});

  int n() const { return static_cast<int>(workers_.rows()); }
  int worker_dim() const { return static_cast<int>(workers_.cols()); }
  int firm_dim() const { return static_cast<int>(firms_.cols()); }

  const RowMatrix& workers() const { return workers_; }
  const RowMatrix& firms() const { return firms_; }
  const Transfers& transfers() const { return transfers_; }
  const Vector& weights() const { return weights_; }

  std::span<const double> worker(int i) const;
  std::span<const double> firm(int j) const;

  int n_observed() const;
  bool has_uniform_weights() const;

  MatchSample with_transfers(Transfers transfers) const;
  MatchSample with_firms(RowMatrix firms) const;

 private:
  RowMatrix workers_;
  RowMatrix firms_;
  Transfers transfers_;
  Vector weights_;
};

// One basis function phi_k(x, y). Either the bilinear product x^(k) y^(l), where
// index 0 stands for the constant 1 and index k >= 1 for covariate column k-1,
// or a user callable with declared dependence on x and y.
class BasisFunction {
 public:
  using Callable = std::function<double(std::span<const double>, std::span<const double>)>;

  static BasisFunction product(int worker_index, int firm_index);
  static BasisFunction custom(std::string label, Callable fn, bool depends_on_x, bool depends_on_y);

  double operator()(std::span<const double> x, std::span<const double> y) const;

  bool is_custom() const { return static_cast<bool>(fn_); }
  int worker_index() const { return worker_index_; }
  int firm_index() const { return firm_index_; }
  bool depends_on_x() const;
  bool depends_on_y() const;
  std::string name() const;

  bool operator==(const BasisFunction& other) const;

 private:
  int worker_index_ = 0;
  int firm_index_ = 0;
  std::string label_;
  Callable fn_;
  bool custom_x_ = false;
  bool custom_y_ = false;
};

// The basis system shared by alpha and gamma, with identification-aware masks.
class BasisSpec {
 public:
  BasisSpec() = default;
  BasisSpec(std::vector<BasisFunction> functions, std::vector<bool> alpha_mask,
            std::vector<bool> gamma_mask);

  int size() const { return static_cast<int>(functions_.size()); }
  const std::vector<BasisFunction>& functions() const { return functions_; }
  const BasisFunction& function(int k) const { return functions_[k]; }
  const std::vector<bool>& alpha_mask() const { return alpha_mask_; }
  const std::vector<bool>& gamma_mask() const { return gamma_mask_; }
  bool shared(int k) const { return alpha_mask_[k] && gamma_mask_[k]; }
  // Depends on both sides, so it is not absorbed by the potentials.
  bool interacts(int k) const {
    return functions_[k].depends_on_x() && functions_[k].depends_on_y();
  }

  // Throws ConfigError when a product index exceeds the covariate dimensions.
  void check_dimensions(int worker_dim, int firm_dim) const;

 private:
  std::vector<BasisFunction> functions_;
  std::vector<bool> alpha_mask_;
  std::vector<bool> gamma_mask_;
};

// theta = (A, Gamma, sigma1, sigma2, t, s2). Masked coefficients are structural zeros.
struct Theta {
  Vector A;
  Vector Gamma;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double t = 0.0;
  double s2 = 1.0;

  Vector phi() const { return A + Gamma; }
  double sigma() const { return sigma1 + sigma2; }
  int K() const { return static_cast<int>(A.size()); }

  // Flat layout (A, Gamma, sigma1, sigma2, t, s2), length 2K+4.
  Vector to_vector() const;
  static Theta from_vector(const Vector& v);

  static Theta zeros(int K);
};

enum class ParamBlock { A, Gamma, Sigma1, Sigma2, T, S2 };
std::string parameter_name(const BasisSpec& spec, int flat_index);

// Throws ConfigError unless sizes match, masks hold and scale parameters are feasible.
void validate(const Theta& theta, const BasisSpec& spec);

Vector eval_basis(const BasisSpec& spec, std::span<const double> x, std::span<const double> y);
double alpha_value(const Theta& theta, const BasisSpec& spec, std::span<const double> x,
                   std::span<const double> y);
double gamma_value(const Theta& theta, const BasisSpec& spec, std::span<const double> x,
                   std::span<const double> y);
double phi_value(const Vector& phi, const BasisSpec& spec, std::span<const double> x,
                 std::span<const double> y);

// Entry (i, j) = sum_k Phi_k phi_k(X_i, Y_j).
Matrix phi_matrix(const Theta& theta, const BasisSpec& spec, const MatchSample& sample);
// Same, for arbitrary worker rows and firm rows and coefficients Phi.
Matrix phi_matrix(const Vector& phi, const BasisSpec& spec, const RowMatrix& workers,
                  const RowMatrix& firms);
// One matrix per basis function: out[k](i, j) = phi_k(workers_i, firms_j).
std::vector<Matrix> basis_matrices(const BasisSpec& spec, const RowMatrix& workers,
                                   const RowMatrix& firms);

// Opt-in z-scoring of covariate columns; the record maps slopes back to raw units.
struct Standardization {
  Vector worker_mean, worker_scale;
  Vector firm_mean, firm_scale;
  std::vector<bool> worker_applied, firm_applied;

  // Slope of basis k in raw covariate units, given its coefficient on the standardized scale.
  double raw_slope(const BasisFunction& f, double coefficient) const;
};

std::pair<MatchSample, Standardization> standardize(const MatchSample& sample,
                                                    const std::vector<int>& worker_columns,
                                                    const std::vector<int>& firm_columns);

}  // namespace jobmatch
