#pragma once

// Generalized EM for the paired mixtures.
//
// The E step computes responsibilities independently in each observation
// space.  The M step updates priors in closed form and, per object, maximizes
// a two-term objective over the latent position
//
//   Q_n(s) = -mass_f * log(1 + D_F(s)) - mass_g * log(1 + D_G(s)),
//   D_F(s) = (mean_f - F(s))' cov_f^{-1} (mean_f - F(s)),
//
// which is the profiled expected complete-data term up to an s-independent
// constant.  Position search = a Choose step (one of four start strategies)
// followed by projected gradient ascent with certified Lipschitz step sizes
// (globally bounded, or locally accelerated on a shrinking trust ball).
// Covariances then follow in closed form.  Each object's step is accepted
// only if it does not lower the exact complete-data term, which makes the
// observed log-likelihood non-decreasing up to floating-point rounding.

#include "cmm/model.hpp"

#include <cstdint>
#include <optional>
#include <utility>

namespace cmm {

/// Responsibilities; rows sum to 1, the last column is the outlier class.
struct Posteriors {
  Mat resp_f;  // M x (N+1)
  Mat resp_g;  // K x (N+1)
};

/// Sufficient statistics of one object in both spaces.  `cov_*` is the
/// weighted scatter about the weighted mean, regularized by a scale-relative
/// ridge; the responsibility columns are retained for exact objective
/// evaluations.
struct ObjectStats {
  double mass_f = 0.0;
  double mass_g = 0.0;
  Vec mean_f;
  Vec mean_g;
  Mat cov_f;
  Mat cov_g;
  Vec weights_f;
  Vec weights_g;
};

struct EmptyComponentError : std::runtime_error {
  EmptyComponentError() : std::runtime_error("empty component") {}
};

/// Position-search variants: the Choose strategy crossed with the local
/// ascent flavor (BA = globally bounded steps, AA = locally accelerated).
enum class Variant { IPBA, IGAA, IVAA, IPAA, IAAA };
enum class ChooseStrategy { IP, IG, IV, IA };
enum class LocalVariant { BA, AA };

ChooseStrategy choose_of(Variant v);
LocalVariant local_of(Variant v);
std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);

struct SearchOptions {
  Variant variant = Variant::IAAA;
  int max_em_iters = 70;
  int mstep_iters = 10;        // ascent iterations per object per M step
  int manifold_samples = 50;   // level-set samples for the IA choose
  int global_samples = 200;    // uniform samples for the IG choose
  double likelihood_tol = 1e-7;
  double regularization = 1e-9;
  bool converge_early = true;  // false: run exactly max_em_iters iterations
  std::uint64_t seed = 0;
  int threads = 1;
};

struct FitReport {
  ModelParams params;
  std::vector<double> loglik_trace;             // length iterations_run + 1
  std::vector<std::vector<Vec>> trajectory;     // positions after each iteration
  Assignment assignment;
  int iterations_run = 0;
  bool converged = false;
  int respawns = 0;
  int choose_fallbacks = 0;
  double final_loglik = 0.0;
};

// ---------------------------------------------------------------------------
// E step and closed-form updates.

Posteriors e_step(const ObservationSet& obs, const MixtureCache& cache, int threads = 1);
Posteriors e_step(const ObservationSet& obs, const ModelParams& params,
                  const SensorMapPair& maps);

/// Column means of the responsibilities: the prior updates for both spaces.
std::pair<Vec, Vec> update_priors(const Posteriors& post);

/// Weighted statistics of object `index` (0-based).  Throws
/// EmptyComponentError when either space carries no responsibility mass.
ObjectStats object_stats(const Posteriors& post, const ObservationSet& obs, int index,
                         double regularization = 1e-9);

/// Closed-form covariance refresh at a new position: scatter plus the rank-one
/// offset between the weighted mean and the mapped position.
std::pair<Mat, Mat> update_covariances(const Vec& s_new, const ObjectStats& stats,
                                       const SensorMapPair& maps);

// ---------------------------------------------------------------------------
// Per-object objective.

/// Expected complete-data term of one object at position s with explicit
/// component covariances (no profiling).  Used to vet candidate updates.
double q_complete(const Vec& s, const Mat& cov_f, const Mat& cov_g, const ObjectStats& stats,
                  const ObservationSet& obs, const SensorMapPair& maps);

/// Full per-observation sum with the profiled covariances cov(s) =
/// scatter + offset offset'.
double q_direct(const Vec& s, const ObjectStats& stats, const ObservationSet& obs,
                const SensorMapPair& maps);

/// The two-log-term reduction; equals q_direct up to an s-independent
/// constant.  Non-positive; 0 exactly when both images hit the means.
double q_simplified(const Vec& s, const ObjectStats& stats, const SensorMapPair& maps);

/// Gradient of q_simplified.
Vec q_gradient(const Vec& s, const ObjectStats& stats, const SensorMapPair& maps);

// ---------------------------------------------------------------------------
// Certified constants of the objective (all derived from phi(v) =
// |Vv| / (1 + v'Vv) applied with V = inverse covariance).

/// sup_v phi(v) bound: sqrt(|V|) / 2.
double phi_bound(const Mat& v_spd);

/// Lipschitz constant of phi: |V| (1 + cond(V) / 2).
double phi_lipschitz(const Mat& v_spd);

/// phi itself, for certificate tests.
double phi_value(const Mat& v_spd, const Vec& v);

/// Bound on |grad q_simplified| given map constants.
double q_gradient_bound(const ObjectStats& stats, const LipschitzPair& f_consts,
                        const LipschitzPair& g_consts);

/// Lipschitz constant of the gradient given map constants.
double q_lipschitz(const ObjectStats& stats, const LipschitzPair& f_consts,
                   const LipschitzPair& g_consts);

/// Same, with each map's configured (global) domain constants.
double q_lipschitz(const ObjectStats& stats, const SensorMapPair& maps);

/// Trust radius for locally accelerated steps: the gradient-norm bound at the
/// current point divided by half the local gradient-Lipschitz constant.
/// nullopt when point-local constants are not admissible.
std::optional<double> ascent_radius(const Vec& s, const ObjectStats& stats,
                                    const SensorMapPair& maps);

// ---------------------------------------------------------------------------
// Position search.

struct ChooseResult {
  Vec position;
  bool fell_back = false;  // strategy was infeasible, previous position kept
};

/// Start-point selection.  IP keeps the previous position; IV maps the
/// first-space mean back through the (injective) map; IA scores level-set
/// samples of the second-space mean; IG scores uniform draws over the
/// admissible region.  Infeasible IA/IG fall back to IP with a flag.
ChooseResult choose(ChooseStrategy strategy, const Vec& prev, const ObjectStats& stats,
                    const SensorMapPair& maps, const Box& bounds, const SearchOptions& opts,
                    Rng& rng);

/// Projected gradient ascent on q_simplified from s0; step size 2/L with L
/// certified globally (BA) or on a local trust ball (AA).  Steps that leave
/// the admissible region are projected back; any step that would lower
/// q_simplified beyond a 1e-10 slack is halved until it does not.
Vec local_search(const Vec& s0, const ObjectStats& stats, const SensorMapPair& maps,
                 const SearchOptions& opts);

// ---------------------------------------------------------------------------

/// Generalized EM from the initial parameters.  Per-object work derives its
/// random stream from (seed, iteration, object), so results are independent
/// of scheduling; an empty component is respawned from fresh candidates and
/// counted in the report.
FitReport fit(const ObservationSet& obs, int n_objects, const ModelParams& theta0,
              const SensorMapPair& maps, const SearchOptions& opts);

}  // namespace cmm
