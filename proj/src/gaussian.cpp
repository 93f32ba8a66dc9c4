#include "cmm/gaussian.hpp"

#include <cmath>
#include <numbers>

namespace cmm {

GaussianPdf::GaussianPdf(Vec mean, const Mat& cov) : mean_(std::move(mean)) {
  if (cov.rows() != cov.cols() || cov.rows() != mean_.size())
    throw std::invalid_argument("gaussian: dimension mismatch");
  if (!spd_check(cov)) throw std::invalid_argument("covariance not positive definite");
  chol_.compute(cov);
  if (chol_.info() != Eigen::Success)
    throw std::invalid_argument("covariance not positive definite");
  log_det_ = 2.0 * Mat(chol_.matrixL()).diagonal().array().log().sum();
  log_norm_ = -0.5 * (mean_.size() * std::log(2.0 * std::numbers::pi) + log_det_);
}

double gaussian_density(const Vec& x, const Vec& mean, const Mat& cov) {
  return GaussianPdf(mean, cov).density(x);
}

double log_gaussian_density(const Vec& x, const Vec& mean, const Mat& cov) {
  return GaussianPdf(mean, cov).log_density(x);
}

}  // namespace cmm
