#pragma once

// Multivariate normal density with a cached Cholesky factorization.  Each EM
// iteration builds one GaussianPdf per (object, space); the per-observation
// loops then cost one triangular solve each.

#include "cmm/types.hpp"

namespace cmm {

class GaussianPdf {
 public:
  /// Factorizes `cov` once; throws std::invalid_argument("covariance not
  /// positive definite") when the matrix is not symmetric positive definite.
  GaussianPdf(Vec mean, const Mat& cov);

  const Vec& mean() const { return mean_; }

  double log_density(const Vec& x) const {
    Vec u = chol_.matrixL().solve(x - mean_);
    return log_norm_ - 0.5 * u.squaredNorm();
  }

  double density(const Vec& x) const { return std::exp(log_density(x)); }

  /// log |cov|, from the cached factor.
  double log_det() const { return log_det_; }

  /// Squared Mahalanobis distance (x - mean)' cov^{-1} (x - mean).
  double mahalanobis2(const Vec& x) const {
    Vec u = chol_.matrixL().solve(x - mean_);
    return u.squaredNorm();
  }

 private:
  Vec mean_;
  Eigen::LLT<Mat> chol_;
  double log_det_ = 0.0;
  double log_norm_ = 0.0;
};

/// One-shot density evaluation.
double gaussian_density(const Vec& x, const Vec& mean, const Mat& cov);

/// One-shot log-density evaluation.
double log_gaussian_density(const Vec& x, const Vec& mean, const Mat& cov);

}  // namespace cmm
