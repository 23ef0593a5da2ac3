#pragma once

#include "jobmatch/equilibrium.hpp"
#include "jobmatch/model.hpp"

#include <cstdint>

namespace jobmatch {

// Population of worker and firm types on a finite grid, in equilibrium at theta_star.
struct GroundTruthMarket {
  RowMatrix grid_workers;  // m_x x d_x
  Vector worker_masses;    // sums to 1
  RowMatrix grid_firms;    // m_y x d_y
  Vector firm_masses;      // sums to 1
  Theta theta_star;
  BasisSpec spec;
  Potentials pots;         // grid potentials, a[0] == 0
  Matrix pi_star;          // m_x x m_y
  Matrix w_star;           // sigma1 (gamma - b) + sigma2 (a - alpha) + t at every grid pair
};

GroundTruthMarket build_market(RowMatrix grid_workers, Vector worker_masses, RowMatrix grid_firms,
                               Vector firm_masses, const Theta& theta_star, const BasisSpec& spec,
                               const SolverOptions& options = {1e-13, 100000});

// n i.i.d. cells from pi_star with W = w_star + N(0, s2*) noise; each transfer is then
// dropped with probability missing_prob. Deterministic in seed.
MatchSample draw_sample(const GroundTruthMarket& market, int n, double missing_prob,
                        std::uint64_t seed);

// Drops each observed transfer independently with probability missing_prob.
MatchSample mask_transfers(const MatchSample& sample, double missing_prob, std::uint64_t seed);

// theta_star expressed in the normalization of a sample drawn from the market: the sample
// system pins a = 0 at the type of observation 0 rather than at grid type 0, which moves t by
// sigma * a*(that type).
Theta truth_for_sample(const GroundTruthMarket& market, const MatchSample& sample);

// Evenly spaced points lo, ..., hi as a one-column grid.
RowMatrix linspace_grid(int m, double lo, double hi);

}  // namespace jobmatch
