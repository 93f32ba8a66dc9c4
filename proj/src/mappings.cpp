#include "cmm/mappings.hpp"

#include <cassert>
#include <cmath>
#include <numbers>

namespace cmm {

namespace {

void require_latent(const Vec& s) {
  if (s.size() != 2 && s.size() != 3)
    throw std::invalid_argument("stereo: latent vector must have size 2 or 3");
}

double depth_of(const Vec& s) { return s[s.size() - 1]; }

double lateral_sq(const Vec& s) { return s.head(s.size() - 1).squaredNorm(); }

constexpr double kDomainMargin = 1e-9;

}  // namespace

Vec stereo_eval(const Vec& s) {
  require_latent(s);
  double z = depth_of(s);
  if (z == 0.0) throw std::domain_error("point at infinity");
  Vec out(s.size());
  out.head(s.size() - 1) = s.head(s.size() - 1) / z;
  out[s.size() - 1] = 1.0 / z;
  return out;
}

Vec stereo_preimage(const Vec& obs) {
  require_latent(obs);
  double d = obs[obs.size() - 1];
  if (d == 0.0) throw std::domain_error("point at infinity");
  Vec out(obs.size());
  out.head(obs.size() - 1) = obs.head(obs.size() - 1) / d;
  out[obs.size() - 1] = 1.0 / d;
  return out;
}

Mat stereo_jacobian(const Vec& s) {
  require_latent(s);
  double z = depth_of(s);
  if (z == 0.0) throw std::domain_error("point at infinity");
  Eigen::Index n = s.size();
  Mat j = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    j(i, i) = 1.0 / z;
    j(i, n - 1) = -s[i] / (z * z);
  }
  j(n - 1, n - 1) = -1.0 / (z * z);
  return j;
}

LipschitzPair stereo_lipschitz(const StereoDomain& domain, int latent_dim) {
  if (latent_dim != 2 && latent_dim != 3)
    throw std::invalid_argument("stereo: latent dimension must be 2 or 3");
  if (!(domain.z_min > 1.0)) throw std::invalid_argument("stereo: depth floor must exceed 1");
  if (!(domain.fov > 0.0)) throw std::invalid_argument("stereo: view cone slope must be positive");
  double l = std::sqrt(static_cast<double>(latent_dim - 1) + domain.fov * domain.fov) / domain.z_min;
  return {l, 1.0 / (domain.z_min * domain.z_min)};
}

double itd_eval(const Vec& s, const ItdConfig& cfg) {
  double v = ((s - cfg.mic1).norm() - (s - cfg.mic2).norm()) / cfg.c;
  assert(std::abs(v) <= cfg.baseline() / cfg.c * (1.0 + 1e-12));
  return v;
}

Vec itd_jacobian(const Vec& s, const ItdConfig& cfg) {
  Vec d1 = s - cfg.mic1;
  Vec d2 = s - cfg.mic2;
  double r1 = d1.norm();
  double r2 = d2.norm();
  if (r1 == 0.0 || r2 == 0.0) throw std::domain_error("point coincides with a microphone");
  return (d1 / r1 - d2 / r2) / cfg.c;
}

LipschitzPair itd_lipschitz(const ItdConfig& cfg) {
  if (!(cfg.R > 1.0)) throw std::invalid_argument("itd: exclusion radius must exceed 1");
  if (!(cfg.c > 0.0)) throw std::invalid_argument("itd: propagation speed must be positive");
  double b = cfg.baseline();
  if (!(b > 0.0)) throw std::invalid_argument("itd: coincident microphones");
  return {b / (cfg.c * cfg.R), 3.0 / (cfg.c * cfg.R)};
}

std::vector<Vec> itd_level_set_sample(double value, int count, const ItdConfig& cfg,
                                      const Box& bounds, Rng& rng) {
  if (count <= 0) throw std::invalid_argument("level-set sampler: count must be positive");
  bounds.validate();
  const Eigen::Index dim = cfg.mic1.size();
  if (bounds.dim() != dim) throw std::invalid_argument("level-set sampler: dimension mismatch");

  const double baseline = cfg.baseline();
  const double range_diff = value * cfg.c;  // |s - mic1| - |s - mic2| on the set
  if (std::abs(range_diff) >= baseline) throw std::domain_error("ITD exceeds baseline");

  const Vec center = 0.5 * (cfg.mic1 + cfg.mic2);
  const Vec axis = (cfg.mic2 - cfg.mic1) / baseline;

  // Orthonormal transverse directions.
  Vec n1(dim), n2;
  {
    Eigen::Index k;
    axis.cwiseAbs().minCoeff(&k);
    n1.setZero();
    n1[k] = 1.0;
    n1 -= n1.dot(axis) * axis;
    n1.normalize();
    if (dim == 3) {
      n2 = Vec(3);
      n2 << axis[1] * n1[2] - axis[2] * n1[1], axis[2] * n1[0] - axis[0] * n1[2],
          axis[0] * n1[1] - axis[1] * n1[0];
    }
  }

  // Hyperbola parameters: vertex offset a along the axis, transverse scale b.
  const double a = 0.5 * std::abs(range_diff);
  const double half = 0.5 * baseline;
  const double b = std::sqrt(half * half - a * a);
  const double side = range_diff > 0.0 ? 1.0 : (range_diff < 0.0 ? -1.0 : 0.0);

  // Parameter ranges that can possibly intersect the bounds box: transverse
  // magnitude up to the farthest corner, axial offset capped accordingly.
  double corner_reach = 0.0;
  double axial_reach = 0.0;
  for (int mask = 0; mask < (1 << dim); ++mask) {
    Vec corner(dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      corner[i] = (mask >> i) & 1 ? bounds.hi[i] : bounds.lo[i];
    corner_reach = std::max(corner_reach, (corner - center).norm());
    axial_reach = std::max(axial_reach, std::abs((corner - center).dot(axis)));
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec> out;
  out.reserve(count);
  const long budget = 10L * count;
  for (long draw = 0; draw < budget && static_cast<int>(out.size()) < count; ++draw) {
    Vec p;
    if (a == 0.0) {
      // Degenerate set: the perpendicular bisector line / plane.
      if (dim == 2) {
        double t = (2.0 * unit(rng) - 1.0) * corner_reach;
        p = center + t * n1;
      } else {
        double t = unit(rng) * corner_reach;
        double phi = 2.0 * std::numbers::pi * unit(rng);
        p = center + t * (std::cos(phi) * n1 + std::sin(phi) * n2);
      }
    } else {
      // Axial offset restricted to values whose transverse coordinate can
      // still fall inside the bounds.
      double xi_cap = a * std::sqrt(1.0 + (corner_reach / b) * (corner_reach / b));
      double xi_hi = std::min(axial_reach, xi_cap);
      if (xi_hi < a) break;  // level set cannot meet the box
      double xi = a + unit(rng) * (xi_hi - a);
      double t = (b / a) * std::sqrt(xi * xi - a * a);
      if (dim == 2) {
        double arm = unit(rng) < 0.5 ? 1.0 : -1.0;
        p = center + side * xi * axis + arm * t * n1;
      } else {
        double phi = 2.0 * std::numbers::pi * unit(rng);
        p = center + side * xi * axis + t * (std::cos(phi) * n1 + std::sin(phi) * n2);
      }
    }
    if (!bounds.contains(p)) continue;
    assert(std::abs(itd_eval(p, cfg) - value) <= 1e-9 * baseline / cfg.c);
    out.push_back(std::move(p));
  }
  if (static_cast<int>(out.size()) < count)
    throw std::runtime_error("level-set sampling budget exhausted");
  return out;
}

ShrunkDomains local_domain_shrink(const Vec& s, double rho, const StereoDomain& stereo,
                                  const ItdConfig& itd) {
  if (!(rho >= 0.0)) throw std::invalid_argument("domain shrink: radius must be non-negative");
  double z_floor = std::abs(depth_of(s)) - rho;
  double r_floor = std::min((s - itd.mic1).norm(), (s - itd.mic2).norm()) - rho;
  if (z_floor <= 1.0 || r_floor <= 1.0) return {stereo, itd, false};
  ShrunkDomains out{stereo, itd, true};
  out.stereo.z_min = z_floor;
  out.itd.R = r_floor;
  return out;
}

// ---------------------------------------------------------------------------

StereoMap::StereoMap(int latent_dim, StereoDomain domain) : dim_(latent_dim), domain_(domain) {
  stereo_lipschitz(domain_, dim_);  // validates both arguments
}

Vec StereoMap::eval(const Vec& s) const { return stereo_eval(s); }

Mat StereoMap::jacobian(const Vec& s) const { return stereo_jacobian(s); }

std::optional<LipschitzPair> StereoMap::local_lipschitz(const Vec& s, double rho) const {
  double z_floor = std::abs(depth_of(s)) - rho;
  if (z_floor <= 1.0) return std::nullopt;
  StereoDomain local = domain_;
  local.z_min = z_floor;
  return stereo_lipschitz(local, dim_);
}

bool StereoMap::in_domain(const Vec& s) const {
  if (s.size() != dim_) return false;
  double z = depth_of(s);
  if (!(std::abs(z) > domain_.z_min)) return false;
  double cone = domain_.fov * z;
  return lateral_sq(s) + 1.0 <= cone * cone;
}

Vec StereoMap::project_into_domain(const Vec& s) const {
  if (in_domain(s)) return s;
  Vec p = s;
  double z = depth_of(p);
  double sign = z < 0.0 ? -1.0 : 1.0;
  double floor = std::max(domain_.z_min, 1.0 / domain_.fov) * (1.0 + kDomainMargin);
  z = sign * std::max(std::abs(z), floor);
  p[p.size() - 1] = z;
  double max_lat_sq = domain_.fov * domain_.fov * z * z - 1.0;
  double lat_sq = lateral_sq(p);
  if (lat_sq > max_lat_sq) {
    double scale = std::sqrt(std::max(0.0, max_lat_sq) / lat_sq) * (1.0 - kDomainMargin);
    p.head(p.size() - 1) *= scale;
  }
  return p;
}

Vec StereoMap::preimage(const Vec& obs) const { return stereo_preimage(obs); }

// ---------------------------------------------------------------------------

ItdMap::ItdMap(ItdConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.mic1.size() != cfg_.mic2.size())
    throw std::invalid_argument("itd: microphone dimension mismatch");
  if (cfg_.mic1.size() != 2 && cfg_.mic1.size() != 3)
    throw std::invalid_argument("itd: microphones must live in dimension 2 or 3");
  itd_lipschitz(cfg_);  // validates R, c, baseline
}

Vec ItdMap::eval(const Vec& s) const {
  Vec out(1);
  out[0] = itd_eval(s, cfg_);
  return out;
}

Mat ItdMap::jacobian(const Vec& s) const { return itd_jacobian(s, cfg_).transpose(); }

std::optional<LipschitzPair> ItdMap::local_lipschitz(const Vec& s, double rho) const {
  double r_floor = std::min((s - cfg_.mic1).norm(), (s - cfg_.mic2).norm()) - rho;
  if (r_floor <= 1.0) return std::nullopt;
  ItdConfig local = cfg_;
  local.R = r_floor;
  return itd_lipschitz(local);
}

bool ItdMap::in_domain(const Vec& s) const {
  if (s.size() != cfg_.mic1.size()) return false;
  return std::min((s - cfg_.mic1).norm(), (s - cfg_.mic2).norm()) > cfg_.R;
}

Vec ItdMap::project_into_domain(const Vec& s) const {
  Vec p = s;
  for (int pass = 0; pass < 2 && !in_domain(p); ++pass) {
    double r1 = (p - cfg_.mic1).norm();
    double r2 = (p - cfg_.mic2).norm();
    const Vec& mic = r1 <= r2 ? cfg_.mic1 : cfg_.mic2;
    double r = std::min(r1, r2);
    Vec dir;
    if (r == 0.0) {
      dir = Vec::Zero(p.size());
      dir[0] = 1.0;
    } else {
      dir = (p - mic) / r;
    }
    p = mic + dir * cfg_.R * (1.0 + 2.0 * kDomainMargin);
  }
  return p;
}

std::vector<Vec> ItdMap::level_set_sample(const Vec& value, int count, const Box& bounds,
                                          Rng& rng) const {
  if (value.size() != 1) throw std::invalid_argument("itd: level value must be scalar");
  return itd_level_set_sample(value[0], count, cfg_, bounds, rng);
}

// ---------------------------------------------------------------------------

void SensorMapPair::validate() const {
  if (!f || !g) throw std::invalid_argument("map pair: missing map");
  if (f->latent_dim() != g->latent_dim())
    throw std::invalid_argument("map pair: latent dimension mismatch");
  latent_bounds.validate();
  if (latent_bounds.dim() != f->latent_dim())
    throw std::invalid_argument("map pair: bounds dimension mismatch");
}

}  // namespace cmm
