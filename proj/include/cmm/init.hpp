#pragma once

// Initialization strategies.
//
// OSC (observation-space clustering): mean-shift modes are found separately in
// each observation space, then carried into the latent space — through the
// closed-form preimage where the map is injective, or by density-scored
// level-set samples where it is not.
//
// PSC (parameter-space clustering): every observation is first carried into
// the latent space the same way, and mean-shift runs once on the pooled
// latent cloud.
//
// Either way the candidate modes are de-duplicated and then weighted by the
// observation mass they capture: every observation is assigned to the nearest
// candidate image in bandwidth-scaled coordinates, per space, and a candidate's
// weight is its summed share.  Negligible-weight artifacts are pruned.  When
// fewer well-supported candidates remain than requested centers, the pool is
// supplemented from the latent point cloud — first with a close companion per
// strong candidate (splitting a heavy cluster in two is what the likelihood
// rewards most), then with the densest points in fresh territory.  N centers
// are picked by complete-linkage clustering of the pool under a
// bandwidth-scaled image-space metric, with the N slots apportioned over the
// groups by captured mass (highest-quotient rule) so surplus slots go to heavy
// structures rather than stray clumps.  Priors start uniform; covariances come
// from the empirical scatter of the observations nearest each center's image.

#include "cmm/mappings.hpp"
#include "cmm/types.hpp"

namespace cmm {

enum class InitStrategy { OSC, PSC };

std::string to_string(InitStrategy s);
InitStrategy init_strategy_from_string(const std::string& name);

struct InitOptions {
  InitStrategy strategy = InitStrategy::PSC;
  // Kernel widths per search space; 0 selects the per-dimension robust rule of
  // thumb 1.06 * min(stddev, IQR / 1.34) * count^(-1/5) computed from the
  // searched point set.
  double bandwidth_f = 0.0;
  double bandwidth_g = 0.0;
  double bandwidth_s = 0.0;
  // De-duplication radii; 0 reuses the bandwidth scale.
  double rarefy_f = 0.0;
  double rarefy_g = 0.0;
  double rarefy_s = 0.0;
  int knn_k = 5;     // neighbor order for density scoring of level-set samples
  int restarts = 10; // mean-shift restarts per search space
};

/// Gaussian-kernel mean shift from `start` until the scaled displacement
/// drops below 1e-6 or 500 iterations elapse.  The kernel density estimate is
/// non-decreasing along the iteration (asserted in debug builds).
Vec mean_shift(const Mat& points, const Vec& start, double bandwidth);

/// Distance from x to its k-th nearest row of `points` (duplicates count).
double knn_distance(const Mat& points, const Vec& x, int k);

/// Greedy in-order thinning: drops every candidate within eps of a kept one.
std::vector<Vec> rarefy(const std::vector<Vec>& candidates, double eps);

struct InitResult {
  ModelParams params;
  bool padded = false;  // fewer candidates than objects; rest drawn uniformly
};

InitResult osc_init(const ObservationSet& obs, const SensorMapPair& maps, int n_objects,
                    const InitOptions& opts, Rng& rng);

InitResult psc_init(const ObservationSet& obs, const SensorMapPair& maps, int n_objects,
                    const InitOptions& opts, Rng& rng);

/// Dispatch on opts.strategy.
InitResult run_init(const ObservationSet& obs, const SensorMapPair& maps, int n_objects,
                    const InitOptions& opts, Rng& rng);

}  // namespace cmm
