#include "cmm/sim.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace cmm {
namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Box box2(double lo0, double hi0, double lo1, double hi1) {
  Box b;
  b.lo = vec2(lo0, lo1);
  b.hi = vec2(hi0, hi1);
  return b;
}

Box box1(double lo, double hi) {
  Box b;
  b.lo = vec1(lo);
  b.hi = vec1(hi);
  return b;
}

Scenario base_scenario() {
  Scenario sc;
  sc.truth = {vec2(-300.0, 1000.0), vec2(10.0, 800.0), vec2(500.0, 1500.0)};
  sc.inliers_f_per_object = 300;
  sc.inliers_g_per_object = 300;
  sc.outlier_fraction = 0.1;

  const double sigma_u = 0.01;   // image-coordinate noise
  const double sigma_d = 1e-4;   // inverse-depth noise
  const double sigma_g = 0.5;    // arrival-difference noise
  Mat cov_f = Mat::Zero(2, 2);
  cov_f(0, 0) = sigma_u * sigma_u;
  cov_f(1, 1) = sigma_d * sigma_d;
  Mat cov_g = Mat::Constant(1, 1, sigma_g * sigma_g);
  sc.noise_f.assign(sc.truth.size(), cov_f);
  sc.noise_g.assign(sc.truth.size(), cov_g);

  sc.gen_box_f = box2(-0.40, 0.45, 2e-4, 1.8e-3);
  sc.gen_box_g = box1(-70.0, 70.0);

  sc.stereo.z_min = 200.0;
  sc.stereo.fov = 1.0;
  sc.itd.mic1 = vec2(-100.0, 0.0);
  sc.itd.mic2 = vec2(100.0, 0.0);
  sc.itd.c = 1.0;
  sc.itd.R = 50.0;
  sc.latent_bounds = box2(-1200.0, 1200.0, 350.0, 2600.0);
  return sc;
}

}  // namespace

Scenario scenario_preset(const std::string& name) {
  Scenario sc = base_scenario();
  sc.name = name;
  if (name == "GoodSep") {
    return sc;
  }
  if (name == "PoorSep") {
    sc.truth[2] = vec2(100.0, 1500.0);
    return sc;
  }
  if (name == "PoorPrec") {
    const double sigma_d = 5e-4;
    for (Mat& c : sc.noise_f) c(1, 1) = sigma_d * sigma_d;
    sc.gen_box_f = box2(-0.40, 0.45, -1.5e-3, 3.5e-3);
    return sc;
  }
  throw std::invalid_argument("unknown scenario preset: " + name);
}

SensorMapPair preset_maps(const Scenario& scenario) {
  SensorMapPair maps;
  const int latent_dim = static_cast<int>(scenario.latent_bounds.dim());
  maps.f = std::make_shared<StereoMap>(latent_dim, scenario.stereo);
  maps.g = std::make_shared<ItdMap>(scenario.itd);
  maps.latent_bounds = scenario.latent_bounds;
  maps.validate();
  return maps;
}

namespace {

struct SpaceDraws {
  Mat rows;
  VecI labels;
};

// Draw `per_object` points around each object image plus uniform outliers,
// then shuffle so ordering carries no information about origin.
SpaceDraws draw_space(const std::vector<Vec>& means, const std::vector<Mat>& covs,
                      int per_object, int n_outliers, const Box& gen_box, Rng& rng) {
  const int n_objects = static_cast<int>(means.size());
  const int dim = static_cast<int>(gen_box.dim());
  const int total = n_objects * per_object + n_outliers;
  SpaceDraws out;
  out.rows.resize(total, dim);
  out.labels.resize(total);

  std::normal_distribution<double> normal(0.0, 1.0);
  int row = 0;
  for (int n = 0; n < n_objects; ++n) {
    Eigen::LLT<Mat> llt(covs[static_cast<std::size_t>(n)]);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("scenario noise covariance not positive definite");
    }
    const Mat chol = llt.matrixL();
    for (int i = 0; i < per_object; ++i, ++row) {
      Vec z(dim);
      for (int d = 0; d < dim; ++d) z[d] = normal(rng);
      out.rows.row(row) = (means[static_cast<std::size_t>(n)] + chol * z).transpose();
      out.labels[row] = n + 1;
    }
  }
  for (int i = 0; i < n_outliers; ++i, ++row) {
    out.rows.row(row) = gen_box.sample(rng).transpose();
    out.labels[row] = n_objects + 1;
  }

  std::vector<int> perm(static_cast<std::size_t>(total));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Mat shuffled(total, dim);
  VecI shuffled_labels(total);
  for (int i = 0; i < total; ++i) {
    shuffled.row(i) = out.rows.row(perm[static_cast<std::size_t>(i)]);
    shuffled_labels[i] = out.labels[perm[static_cast<std::size_t>(i)]];
  }
  out.rows = std::move(shuffled);
  out.labels = std::move(shuffled_labels);
  return out;
}

// Bounding box of the rows with every half-extent inflated by 10%.
Box inflated_bbox(const Mat& rows) {
  Box b;
  b.lo = rows.colwise().minCoeff().transpose();
  b.hi = rows.colwise().maxCoeff().transpose();
  const Vec center = 0.5 * (b.lo + b.hi);
  const Vec half = 0.55 * (b.hi - b.lo);
  b.lo = center - half;
  b.hi = center + half;
  return b;
}

}  // namespace

SimResult simulate(const Scenario& scenario, const SensorMapPair& maps, Rng& rng) {
  const int n_objects = static_cast<int>(scenario.truth.size());
  if (n_objects == 0) throw std::invalid_argument("scenario has no objects");
  if (scenario.noise_f.size() != scenario.truth.size() ||
      scenario.noise_g.size() != scenario.truth.size()) {
    throw std::invalid_argument("scenario noise covariances do not match object count");
  }
  if (scenario.inliers_f_per_object <= 0 || scenario.inliers_g_per_object <= 0) {
    throw std::invalid_argument("scenario inlier counts must be positive");
  }
  if (scenario.outlier_fraction < 0.0) {
    throw std::invalid_argument("scenario outlier fraction must be nonnegative");
  }

  std::vector<Vec> means_f, means_g;
  means_f.reserve(scenario.truth.size());
  means_g.reserve(scenario.truth.size());
  for (const Vec& s : scenario.truth) {
    if (!maps.in_domain(s)) {
      throw std::invalid_argument("scenario truth position outside the admissible region");
    }
    means_f.push_back(maps.f->eval(s));
    means_g.push_back(maps.g->eval(s));
  }

  const int outliers_f = static_cast<int>(
      std::lround(scenario.outlier_fraction * n_objects * scenario.inliers_f_per_object));
  const int outliers_g = static_cast<int>(
      std::lround(scenario.outlier_fraction * n_objects * scenario.inliers_g_per_object));

  SpaceDraws df = draw_space(means_f, scenario.noise_f, scenario.inliers_f_per_object,
                             outliers_f, scenario.gen_box_f, rng);
  SpaceDraws dg = draw_space(means_g, scenario.noise_g, scenario.inliers_g_per_object,
                             outliers_g, scenario.gen_box_g, rng);

  SimResult result;
  result.obs.f = std::move(df.rows);
  result.obs.g = std::move(dg.rows);
  result.obs.box_f = inflated_bbox(result.obs.f);
  result.obs.box_g = inflated_bbox(result.obs.g);
  result.obs.support_f = result.obs.box_f.volume();
  result.obs.support_g = result.obs.box_g.volume();
  result.labels_f = std::move(df.labels);
  result.labels_g = std::move(dg.labels);
  result.obs.validate();
  return result;
}

namespace {

double rel_to(double err, double scale) {
  return err / std::max(scale, 1e-12);
}

}  // namespace

ErrorReport error_report(const ModelParams& estimate, const std::vector<Vec>& truth,
                         const SensorMapPair& maps) {
  const int n_est = static_cast<int>(estimate.objects.size());
  const int n_true = static_cast<int>(truth.size());
  if (n_est == 0 || n_true == 0) {
    throw std::invalid_argument("error report needs at least one object on each side");
  }

  // Exhaustive matching: permute the larger side, pair its first entries with
  // the smaller side, keep the assignment with least total latent distance.
  const bool est_larger = n_est > n_true;
  const int larger = std::max(n_est, n_true);
  const int smaller = std::min(n_est, n_true);
  std::vector<int> perm(static_cast<std::size_t>(larger));
  std::iota(perm.begin(), perm.end(), 0);

  auto pair_distance = [&](int small_idx, int large_idx) {
    const Vec& e = est_larger ? estimate.objects[static_cast<std::size_t>(large_idx)].position
                              : estimate.objects[static_cast<std::size_t>(small_idx)].position;
    const Vec& t = est_larger ? truth[static_cast<std::size_t>(small_idx)]
                              : truth[static_cast<std::size_t>(large_idx)];
    return (e - t).norm();
  };

  std::vector<int> best;
  double best_total = std::numeric_limits<double>::infinity();
  std::sort(perm.begin(), perm.end());
  do {
    double total = 0.0;
    for (int i = 0; i < smaller; ++i) total += pair_distance(i, perm[static_cast<std::size_t>(i)]);
    if (total < best_total) {
      best_total = total;
      best.assign(perm.begin(), perm.begin() + smaller);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  ErrorReport report;
  report.total_s = best_total;
  for (int i = 0; i < smaller; ++i) {
    const int est_idx = est_larger ? best[static_cast<std::size_t>(i)] : i;
    const int true_idx = est_larger ? i : best[static_cast<std::size_t>(i)];
    const Vec& s_hat = estimate.objects[static_cast<std::size_t>(est_idx)].position;
    const Vec& s_true = truth[static_cast<std::size_t>(true_idx)];

    ObjectErrorRow row;
    row.estimate_index = est_idx;
    row.truth_index = true_idx;
    row.err_s = (s_hat - s_true).norm();
    row.rel_s = rel_to(row.err_s, s_true.norm());

    const Vec f_true = maps.f->eval(s_true);
    const Vec g_true = maps.g->eval(s_true);
    if (maps.f->in_domain(s_hat)) {
      row.err_f = (maps.f->eval(s_hat) - f_true).norm();
      row.rel_f = rel_to(row.err_f, f_true.norm());
    } else {
      row.err_f = std::numeric_limits<double>::quiet_NaN();
      row.rel_f = std::numeric_limits<double>::quiet_NaN();
    }
    if (maps.g->in_domain(s_hat)) {
      row.err_g = (maps.g->eval(s_hat) - g_true).norm();
      row.rel_g = rel_to(row.err_g, g_true.norm());
    } else {
      row.err_g = std::numeric_limits<double>::quiet_NaN();
      row.rel_g = std::numeric_limits<double>::quiet_NaN();
    }
    report.max_rel_s = std::max(report.max_rel_s, row.rel_s);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace cmm
