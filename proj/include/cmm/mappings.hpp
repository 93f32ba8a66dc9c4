#pragma once

// Sensor maps tying the latent space to the observation spaces.
//
// Two concrete families are provided:
//   * stereo projection  (x, z) -> (x/z, 1/z)  and  (x, y, z) -> (x/z, y/z, 1/z),
//     injective on its domain, with a closed-form preimage;
//   * interaural time difference (ITD)
//     s -> (|s - mic1| - |s - mic2|) / c,
//     non-injective: a level set is one branch of a hyperbola (2-D) or a
//     hyperboloid sheet (3-D), for which a parametric sampler is provided.
//
// Every map carries Lipschitz certificates (a bound on the map and on its
// Jacobian) valid on its configured domain.  The admissible stereo domain is
//   { |z| > z_min,  |lateral|^2 + 1 <= (fov * z)^2 },   z_min > 1,
// i.e. a depth floor together with a view cone; both restrictions are needed
// for the closed-form constants below to hold.  The ITD domain excludes balls
// of radius R (> 1) around the microphones.

#include "cmm/types.hpp"

#include <memory>
#include <optional>

namespace cmm {

/// Certified constants: `map` bounds the map's Lipschitz constant, `deriv`
/// bounds the Jacobian's Lipschitz constant, both on the configured domain.
struct LipschitzPair {
  double map = 0.0;
  double deriv = 0.0;
};

/// Admissible region for the stereo map.
struct StereoDomain {
  double z_min = 1.0;  // depth floor, must exceed 1
  double fov = 1.0;    // max ratio |lateral| / |z| (slope of the view cone)
};

/// Microphone-pair geometry for the ITD map.
struct ItdConfig {
  Vec mic1;
  Vec mic2;
  double c = 1.0;  // propagation speed (observation units per distance unit)
  double R = 1.0;  // exclusion radius around each microphone, must exceed 1

  double baseline() const { return (mic2 - mic1).norm(); }
};

// ---------------------------------------------------------------------------
// Stereo free functions.  Latent vectors of size 2 are treated as the planar
// reduction (x, z); size 3 as the full (x, y, z) geometry.

/// (x, z) -> (x/z, 1/z)  or  (x, y, z) -> (x/z, y/z, 1/z).
/// Throws std::domain_error("point at infinity") when z == 0.
Vec stereo_eval(const Vec& s);

/// Inverse of stereo_eval: (u, d) -> (u/d, 1/d), (u, v, d) -> (u/d, v/d, 1/d).
/// Throws std::domain_error("point at infinity") when the last coordinate is 0.
Vec stereo_preimage(const Vec& obs);

/// Jacobian of stereo_eval at s (square, upper triangular).
Mat stereo_jacobian(const Vec& s);

/// Closed-form certificates on the domain: L = sqrt(dim - 1 + fov^2) / z_min,
/// L' = 1 / z_min^2.  `latent_dim` is 2 or 3.
LipschitzPair stereo_lipschitz(const StereoDomain& domain, int latent_dim);

// ---------------------------------------------------------------------------
// ITD free functions.

/// (|s - mic1| - |s - mic2|) / c.  The result always lies in
/// [-baseline/c, baseline/c]; asserted in debug builds.
double itd_eval(const Vec& s, const ItdConfig& cfg);

/// Gradient (unit1 - unit2) / c where unit_i is the unit vector from mic_i
/// to s.  Throws std::domain_error when s coincides with a microphone.
Vec itd_jacobian(const Vec& s, const ItdConfig& cfg);

/// Certificates on the domain: L = baseline / (c R), L' = 3 / (c R).
LipschitzPair itd_lipschitz(const ItdConfig& cfg);

/// Uniform parameter-space samples of the level set { s : itd_eval(s) = value }
/// intersected with `bounds`.  The level set is parameterized by
/// (offset along the mic axis implied by the hyperbola equation, transverse
/// coordinates); parameters are drawn uniformly and rejected against `bounds`
/// with a 10 * count draw budget.
/// Throws std::domain_error("ITD exceeds baseline") when |value| >= baseline/c
/// and std::runtime_error on budget exhaustion.
std::vector<Vec> itd_level_set_sample(double value, int count, const ItdConfig& cfg,
                                      const Box& bounds, Rng& rng);

// ---------------------------------------------------------------------------
// Ball-local domain tightening for locally accelerated ascent steps.

struct ShrunkDomains {
  StereoDomain stereo;
  ItdConfig itd;
  bool shrunk = false;  // false: floors fell to <= 1, inputs returned unchanged
};

/// Tightens both domains so they remain valid on the closed ball of radius
/// `rho` around `s`: the depth floor becomes |z(s)| - rho and the exclusion
/// radius becomes (min distance to a microphone) - rho.  When either floor
/// drops to <= 1 the passed-in (global) domains are returned with
/// shrunk = false.
ShrunkDomains local_domain_shrink(const Vec& s, double rho, const StereoDomain& stereo,
                                  const ItdConfig& itd);

// ---------------------------------------------------------------------------
// Polymorphic map interface used by the EM machinery.

class SensorMap {
 public:
  virtual ~SensorMap() = default;

  virtual int latent_dim() const = 0;
  virtual int obs_dim() const = 0;
  virtual std::string name() const = 0;

  virtual Vec eval(const Vec& s) const = 0;
  virtual Mat jacobian(const Vec& s) const = 0;

  /// Certificates on the configured (global) domain.
  virtual LipschitzPair lipschitz() const = 0;

  /// Certificates valid on the ball of radius `rho` around `s`; nullopt when
  /// the tightened floors are not admissible (caller falls back to global).
  virtual std::optional<LipschitzPair> local_lipschitz(const Vec& s, double rho) const {
    (void)s;
    (void)rho;
    return lipschitz();
  }

  virtual bool in_domain(const Vec& s) const = 0;

  /// Nearest-in-spirit admissible point; used to re-enter the domain after an
  /// ascent step overshoots.  Identity for points already inside.
  virtual Vec project_into_domain(const Vec& s) const = 0;

  virtual bool has_preimage() const { return false; }
  virtual Vec preimage(const Vec& obs) const {
    (void)obs;
    throw std::logic_error("preimage unavailable");
  }

  virtual bool has_level_set_sampler() const { return false; }
  virtual std::vector<Vec> level_set_sample(const Vec& value, int count, const Box& bounds,
                                            Rng& rng) const {
    (void)value;
    (void)count;
    (void)bounds;
    (void)rng;
    throw std::logic_error("level-set sampler unavailable");
  }
};

/// Stereo projection map; latent_dim 2 or 3.
class StereoMap final : public SensorMap {
 public:
  StereoMap(int latent_dim, StereoDomain domain);

  int latent_dim() const override { return dim_; }
  int obs_dim() const override { return dim_; }
  std::string name() const override { return dim_ == 2 ? "stereo2" : "stereo3"; }

  Vec eval(const Vec& s) const override;
  Mat jacobian(const Vec& s) const override;
  LipschitzPair lipschitz() const override { return stereo_lipschitz(domain_, dim_); }
  std::optional<LipschitzPair> local_lipschitz(const Vec& s, double rho) const override;

  bool in_domain(const Vec& s) const override;
  Vec project_into_domain(const Vec& s) const override;

  bool has_preimage() const override { return true; }
  Vec preimage(const Vec& obs) const override;

  const StereoDomain& domain() const { return domain_; }

 private:
  int dim_;
  StereoDomain domain_;
};

/// Interaural-time-difference map; latent_dim follows the microphone vectors.
class ItdMap final : public SensorMap {
 public:
  explicit ItdMap(ItdConfig cfg);

  int latent_dim() const override { return static_cast<int>(cfg_.mic1.size()); }
  int obs_dim() const override { return 1; }
  std::string name() const override { return "itd"; }

  Vec eval(const Vec& s) const override;
  Mat jacobian(const Vec& s) const override;
  LipschitzPair lipschitz() const override { return itd_lipschitz(cfg_); }
  std::optional<LipschitzPair> local_lipschitz(const Vec& s, double rho) const override;

  bool in_domain(const Vec& s) const override;
  Vec project_into_domain(const Vec& s) const override;

  bool has_level_set_sampler() const override { return true; }
  std::vector<Vec> level_set_sample(const Vec& value, int count, const Box& bounds,
                                    Rng& rng) const override;

  const ItdConfig& config() const { return cfg_; }

 private:
  ItdConfig cfg_;
};

/// The pair of maps plus the latent search region shared by all EM routines.
struct SensorMapPair {
  std::shared_ptr<const SensorMap> f;
  std::shared_ptr<const SensorMap> g;
  Box latent_bounds;

  bool in_domain(const Vec& s) const { return f->in_domain(s) && g->in_domain(s); }

  bool admissible(const Vec& s) const { return latent_bounds.contains(s) && in_domain(s); }

  /// Clamp to the bounds box, then repair any domain violation.
  Vec project(const Vec& s) const {
    Vec p = g->project_into_domain(f->project_into_domain(latent_bounds.clamp(s)));
    return p;
  }

  void validate() const;
};

}  // namespace cmm
