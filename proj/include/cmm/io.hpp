#pragma once

// Serialization: JSON converters for the core types, a JSON-lines dataset
// format, and report emitters used by the command-line tools.
//
// Dataset files carry one JSON object per line.  The first line is a metadata
// header (dimensions, supports, map configuration, and — when produced by the
// simulator — scenario name, seed, ground truth, and labels); every following
// line is one observation, {"space": "F"|"G", "v": [...]}.

#include "cmm/em.hpp"
#include "cmm/select.hpp"
#include "cmm/sim.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>

namespace cmm {

/// Insertion-ordered JSON so emitted files are stable byte-for-byte.
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Basic converters.

Json to_json(const Vec& v);
Json to_json(const Mat& m);  // array of rows
Json to_json(const Box& b);  // {"lo": [...], "hi": [...]}

Vec vec_from_json(const Json& j);
Mat mat_from_json(const Json& j);
Box box_from_json(const Json& j);

// ---------------------------------------------------------------------------
// Sensor maps.

Json maps_to_json(const SensorMapPair& maps);

/// Rebuild the map pair; each slot dispatches on its "kind" tag
/// ("stereo" or "itd").  Throws std::invalid_argument on unknown kinds and
/// propagates validation errors.
SensorMapPair maps_from_json(const Json& j);

// ---------------------------------------------------------------------------
// Model parameters.

Json params_to_json(const ModelParams& params);
ModelParams params_from_json(const Json& j);

// ---------------------------------------------------------------------------
// Dataset files.

/// Provenance carried in the dataset header; any field may be left empty when
/// the information does not exist for the data at hand.
struct DatasetMeta {
  std::string scenario;    // preset name, empty when not simulated
  std::uint64_t seed = 0;  // generator seed, meaningful only with a scenario
  std::vector<Vec> truth;  // latent ground truth
  VecI labels_f;           // ground-truth labels, 1..N+1
  VecI labels_g;
};

void save_dataset(const std::string& path, const ObservationSet& obs,
                  const SensorMapPair& maps, const DatasetMeta& meta);

struct Dataset {
  ObservationSet obs;
  SensorMapPair maps;
  DatasetMeta meta;
};

/// Parse a dataset file; errors mention the path and the 1-based line number.
Dataset load_dataset(const std::string& path);

// ---------------------------------------------------------------------------
// Reports.

Json fit_report_to_json(const FitReport& report);
Json select_result_to_json(const SelectResult& result);
Json error_report_to_json(const ErrorReport& report);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace cmm
