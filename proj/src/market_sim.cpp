#include "jobmatch/market_sim.hpp"

#include "jobmatch/error.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace jobmatch {

namespace {

void check_masses(const Vector& m, Eigen::Index rows, const char* side) {
  if (m.size() != rows) {
    throw ConfigError(std::string(side) + " masses do not match the grid size");
  }
  if ((m.array() <= 0.0).any() || !m.allFinite()) {
    throw ConfigError(std::string(side) + " masses must be positive");
  }
  if (std::abs(m.sum() - 1.0) > 1e-12) {
    throw ConfigError(std::string(side) + " masses must sum to 1");
  }
}

void check_distinct(const RowMatrix& grid, const char* side) {
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    std::vector<double> row(grid.row(i).data(), grid.row(i).data() + grid.cols());
    if (!seen.insert(row).second) {
      throw ConfigError(std::string(side) + " grid points must be distinct");
    }
  }
}

}  // namespace

RowMatrix linspace_grid(int m, double lo, double hi) {
  if (m < 1) throw ConfigError("grid needs at least one point");
  RowMatrix g(m, 1);
  for (int i = 0; i < m; ++i) g(i, 0) = m == 1 ? lo : lo + (hi - lo) * i / (m - 1);
  return g;
}

GroundTruthMarket build_market(RowMatrix grid_workers, Vector worker_masses, RowMatrix grid_firms,
                               Vector firm_masses, const Theta& theta_star, const BasisSpec& spec,
                               const SolverOptions& options) {
  check_masses(worker_masses, grid_workers.rows(), "worker");
  check_masses(firm_masses, grid_firms.rows(), "firm");
  check_distinct(grid_workers, "worker");
  check_distinct(grid_firms, "firm");
  spec.check_dimensions(static_cast<int>(grid_workers.cols()), static_cast<int>(grid_firms.cols()));
  // s2 = 0 is a noiseless market, fine for simulation though not for estimation.
  if (theta_star.s2 < 0.0) throw ConfigError("s2 must be nonnegative");
  Theta check = theta_star;
  if (check.s2 == 0.0) check.s2 = 1.0;
  validate(check, spec);

  GroundTruthMarket m;
  m.grid_workers = std::move(grid_workers);
  m.worker_masses = std::move(worker_masses);
  m.grid_firms = std::move(grid_firms);
  m.firm_masses = std::move(firm_masses);
  m.theta_star = theta_star;
  m.spec = spec;

  const Matrix phi = phi_matrix(theta_star.phi(), spec, m.grid_workers, m.grid_firms);
  m.pots = solve_potentials(phi, m.worker_masses, m.firm_masses, options);
  m.pi_star = matching_density(phi, m.pots).pi();

  const Matrix alpha = phi_matrix(theta_star.A, spec, m.grid_workers, m.grid_firms);
  const Matrix gamma = phi_matrix(theta_star.Gamma, spec, m.grid_workers, m.grid_firms);
  const double s1 = theta_star.sigma1, s2 = theta_star.sigma2;
  m.w_star.resize(phi.rows(), phi.cols());
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    for (Eigen::Index j = 0; j < phi.cols(); ++j) {
      m.w_star(i, j) = s1 * (gamma(i, j) - m.pots.b(j)) + s2 * (m.pots.a(i) - alpha(i, j)) +
                       theta_star.t;
    }
  }
  return m;
}

MatchSample draw_sample(const GroundTruthMarket& market, int n, double missing_prob,
                        std::uint64_t seed) {
  if (n < 1) throw ConfigError("draw_sample needs n >= 1");
  if (!(missing_prob >= 0.0 && missing_prob <= 1.0)) {
    throw ConfigError("missing_prob must lie in [0, 1]");
  }
  const auto mx = market.pi_star.rows();
  const auto my = market.pi_star.cols();

  // Cumulative distribution over cells in row-major order.
  std::vector<double> cdf(static_cast<std::size_t>(mx * my));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mx; ++i) {
    for (Eigen::Index j = 0; j < my; ++j) {
      acc += market.pi_star(i, j);
      cdf[static_cast<std::size_t>(i * my + j)] = acc;
    }
  }
  for (double& c : cdf) c /= acc;
  cdf.back() = 1.0;

  boost::random::mt19937_64 rng(seed);
  boost::random::uniform_01<double> unif;
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(market.theta_star.s2);

  RowMatrix workers(n, market.grid_workers.cols());
  RowMatrix firms(n, market.grid_firms.cols());
  Transfers W(n);
  for (int r = 0; r < n; ++r) {
    const double u = unif(rng);
    const auto cell = static_cast<Eigen::Index>(std::upper_bound(cdf.begin(), cdf.end(), u) -
                                                cdf.begin());
    const Eigen::Index c = std::min(cell, mx * my - 1);
    const Eigen::Index i = c / my, j = c % my;
    workers.row(r) = market.grid_workers.row(i);
    firms.row(r) = market.grid_firms.row(j);
    const double eps = normal(rng);
    const double keep = unif(rng);
    const double value = market.theta_star.s2 > 0.0 ? market.w_star(i, j) + sd * eps
                                                    : market.w_star(i, j);
    if (keep >= missing_prob) W[r] = value;
  }
  return MatchSample(std::move(workers), std::move(firms), std::move(W));
}

Theta truth_for_sample(const GroundTruthMarket& market, const MatchSample& sample) {
  const auto x0 = sample.worker(0);
  for (Eigen::Index i = 0; i < market.grid_workers.rows(); ++i) {
    bool same = market.grid_workers.cols() == static_cast<Eigen::Index>(x0.size());
    for (Eigen::Index c = 0; same && c < market.grid_workers.cols(); ++c) {
      same = market.grid_workers(i, c) == x0[c];
    }
    if (same) {
      Theta th = market.theta_star;
      th.t += th.sigma() * market.pots.a(i);
      return th;
    }
  }
  throw ConfigError("observation 0 is not a worker type of the market");
}

MatchSample mask_transfers(const MatchSample& sample, double missing_prob, std::uint64_t seed) {
  if (!(missing_prob >= 0.0 && missing_prob <= 1.0)) {
    throw ConfigError("missing_prob must lie in [0, 1]");
  }
  boost::random::mt19937_64 rng(seed);
  boost::random::uniform_01<double> unif;
  Transfers W = sample.transfers();
  for (auto& w : W) {
    const double u = unif(rng);
    if (w && u < missing_prob) w.reset();
  }
  return sample.with_transfers(std::move(W));
}

}  // namespace jobmatch
