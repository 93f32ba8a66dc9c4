#pragma once

// Model-order selection: fit each candidate component count with a fresh
// initialization and keep the count minimizing the Bayesian information
// criterion.

#include "cmm/em.hpp"
#include "cmm/init.hpp"

namespace cmm {

/// Free parameters of the N-component model: per object a latent position
/// (d), two covariances (r(r+1)/2 and p(p+1)/2), plus two length-N+1 prior
/// simplices contributing N free entries each.
int model_dimension(int n_objects, int latent_dim, int obs_dim_f, int obs_dim_g);

struct BicScore {
  int n_objects = 0;
  double score = 0.0;        // -2 loglik + dim * log(sample count)
  double final_loglik = 0.0;
  int dimension = 0;
  bool fit_failed = false;   // score is +inf, kept in the curve
};

/// Criterion value for one finished fit.
BicScore bic_score(const FitReport& fit, const ObservationSet& obs, const SensorMapPair& maps);

struct SelectResult {
  int best_n = 0;
  std::vector<BicScore> curve;   // one entry per candidate count 1..n_max
  std::vector<FitReport> fits;   // aligned with curve (failed fits are empty)
};

/// Sweep N = 1..n_max; each candidate gets its own initialization seeded from
/// (seed, N).  A fit that throws is recorded as +inf and never aborts the
/// sweep.
SelectResult select_n(const ObservationSet& obs, const SensorMapPair& maps, int n_max,
                      const SearchOptions& search_opts, const InitOptions& init_opts);

}  // namespace cmm
