#pragma once

// Synthetic scenes: named presets with known ground truth, the generator that
// turns them into observation sets, and error reporting against the truth.

#include "cmm/mappings.hpp"
#include "cmm/types.hpp"

namespace cmm {

struct Scenario {
  std::string name;
  std::vector<Vec> truth;           // latent object positions
  int inliers_f_per_object = 300;
  int inliers_g_per_object = 300;
  double outlier_fraction = 0.1;    // per space, relative to the inlier total
  std::vector<Mat> noise_f;         // per-object observation covariances
  std::vector<Mat> noise_g;
  Box gen_box_f;                    // outlier draw regions
  Box gen_box_g;
  StereoDomain stereo;              // scene geometry
  ItdConfig itd;
  Box latent_bounds;
};

/// "GoodSep" (well-separated objects), "PoorSep" (two objects nearly aligned
/// in the first space), "PoorPrec" (depth noise inflated five-fold).
Scenario scenario_preset(const std::string& name);

/// Planar stereo + microphone-pair maps configured from the scenario geometry.
SensorMapPair preset_maps(const Scenario& scenario);

struct SimResult {
  ObservationSet obs;
  VecI labels_f;  // ground truth, 1..N+1 with N+1 = outlier
  VecI labels_g;
};

/// Draw inliers around each object's images, outliers uniformly over the
/// generation boxes, shuffle within each space, and declare supports as the
/// bounding box of everything drawn inflated by 10%.
SimResult simulate(const Scenario& scenario, const SensorMapPair& maps, Rng& rng);

struct ObjectErrorRow {
  int estimate_index = 0;
  int truth_index = 0;
  double err_s = 0.0;   // latent-space distance
  double rel_s = 0.0;   // relative to the truth norm
  double err_f = 0.0;   // image distance in the first space
  double rel_f = 0.0;
  double err_g = 0.0;   // image distance in the second space
  double rel_g = 0.0;
};

struct ErrorReport {
  std::vector<ObjectErrorRow> rows;
  double total_s = 0.0;
  double max_rel_s = 0.0;
};

/// Match estimated objects to ground truth by minimal total latent-space
/// distance (exhaustive over permutations; object counts here are small) and
/// report absolute plus relative errors in all three spaces.
ErrorReport error_report(const ModelParams& estimate, const std::vector<Vec>& truth,
                         const SensorMapPair& maps);

}  // namespace cmm
