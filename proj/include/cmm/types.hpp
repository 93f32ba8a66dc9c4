#pragma once

// Core value types shared across the library: axis-aligned boxes, model
// parameters, observation sets and hard assignments.  All linear algebra is
// dense Eigen; dimensions are small (latent 2-3, observation 1-3) and known
// only at runtime.

#include <Eigen/Dense>

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecI = Eigen::VectorXi;
using Rng = std::mt19937_64;

/// Axis-aligned box, the support of the uniform outlier component and the
/// sampling region for global starts.
struct Box {
  Vec lo;
  Vec hi;

  Eigen::Index dim() const { return lo.size(); }

  double volume() const {
    if (lo.size() == 0) throw std::invalid_argument("box: empty bounds");
    return (hi - lo).prod();
  }

  bool contains(const Vec& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }

  Vec clamp(const Vec& x) const {
    return x.array().max(lo.array()).min(hi.array()).matrix();
  }

  Vec sample(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vec x(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) x[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    return x;
  }

  void validate() const {
    if (lo.size() == 0 || lo.size() != hi.size())
      throw std::invalid_argument("box: inconsistent bounds");
    if (!((hi - lo).array() > 0.0).all())
      throw std::invalid_argument("box: degenerate side");
  }
};

/// Tying parameters of one cluster: a point in the latent space whose images
/// under the sensor maps are the component means in every observation space.
struct ObjectParams {
  Vec position;
};

/// Full parameter set of the paired mixtures: per-space priors over N
/// components plus one outlier class, shared object positions, per-space
/// component covariances.
struct ModelParams {
  Vec priors_f;                       // length N+1, last entry = outlier mass
  Vec priors_g;                       // length N+1
  std::vector<ObjectParams> objects;  // length N
  std::vector<Mat> cov_f;             // N matrices, r x r
  std::vector<Mat> cov_g;             // N matrices, p x p

  int n_objects() const { return static_cast<int>(objects.size()); }

  void validate() const;
};

/// Observations in the two sensor spaces together with the uniform-component
/// supports.  Rows of `f` / `g` are individual observations.
struct ObservationSet {
  Mat f;  // M x r
  Mat g;  // K x p
  Box box_f;
  Box box_g;
  double support_f = 0.0;  // volume of box_f
  double support_g = 0.0;  // volume of box_g

  Eigen::Index count_f() const { return f.rows(); }
  Eigen::Index count_g() const { return g.rows(); }

  void validate() const;
};

/// Hard labels from the posterior argmax; values in 1..N+1, N+1 = outlier.
struct Assignment {
  VecI labels_f;
  VecI labels_g;
};

inline bool spd_check(const Mat& c) {
  if (c.rows() != c.cols() || c.rows() == 0) return false;
  double scale = c.cwiseAbs().maxCoeff();
  if (!c.allFinite()) return false;
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale)) return false;
  Eigen::LLT<Mat> llt(c);
  return llt.info() == Eigen::Success;
}

}  // namespace cmm
