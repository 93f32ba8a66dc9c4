#pragma once

// Paired mixture densities.  Each observation space carries N Gaussian
// components, whose means are the images of the shared object positions under
// that space's sensor map, plus one uniform outlier component over the
// declared support box.  All per-observation work happens in the log domain.

#include "cmm/gaussian.hpp"
#include "cmm/mappings.hpp"
#include "cmm/types.hpp"

namespace cmm {

/// Per-iteration evaluation cache: component densities factorized once, priors
/// logged once.  Rebuilt whenever the parameters change.
struct MixtureCache {
  std::vector<GaussianPdf> comps_f;
  std::vector<GaussianPdf> comps_g;
  Vec log_prior_f;  // length N+1, -inf entries allowed for zero priors
  Vec log_prior_g;
  double log_unif_f = 0.0;  // -log V
  double log_unif_g = 0.0;  // -log U
};

MixtureCache build_mixture_cache(const ModelParams& params, const SensorMapPair& maps,
                                 double support_f, double support_g);

/// log of the mixture density of one observation in the first space.
double log_mixture_f(const MixtureCache& cache, const Vec& x);

/// log of the mixture density of one observation in the second space.
double log_mixture_g(const MixtureCache& cache, const Vec& x);

/// Mixture density in the first observation space (strictly positive result).
double mixture_density_f(const Vec& x, const ModelParams& params, const SensorMapPair& maps,
                         double support);

/// Mixture density in the second observation space.
double mixture_density_g(const Vec& x, const ModelParams& params, const SensorMapPair& maps,
                         double support);

/// Joint observed-data log-likelihood: the sum of per-observation log mixture
/// densities over both spaces.  Throws std::domain_error("zero-density
/// observation") when any observation has zero density under every component.
double log_likelihood(const ObservationSet& obs, const ModelParams& params,
                      const SensorMapPair& maps);

/// As above but reusing a prebuilt cache.
double log_likelihood(const ObservationSet& obs, const MixtureCache& cache);

/// Numerically safe log(sum(exp(terms))); -inf for an all--inf input.
double log_sum_exp(const Vec& terms);

}  // namespace cmm
