#include "cmm/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cmm {

namespace {

[[noreturn]] void fail_line(const std::string& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Basic converters.

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vec(m.row(i))));
  return rows;
}

Json to_json(const Box& b) { return Json{{"lo", to_json(b.lo)}, {"hi", to_json(b.hi)}}; }

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const Json& x : j) {
    if (!x.is_number()) throw std::invalid_argument("expected an array of numbers");
    v[i++] = x.get<double>();
  }
  return v;
}

Mat mat_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Vec first = vec_from_json(j.front());
  Mat m(rows, first.size());
  m.row(0) = first.transpose();
  for (Eigen::Index i = 1; i < rows; ++i) {
    Vec row = vec_from_json(j[static_cast<std::size_t>(i)]);
    if (row.size() != m.cols()) throw std::invalid_argument("ragged matrix rows");
    m.row(i) = row.transpose();
  }
  return m;
}

Box box_from_json(const Json& j) {
  Box b;
  b.lo = vec_from_json(j.at("lo"));
  b.hi = vec_from_json(j.at("hi"));
  b.validate();
  return b;
}

// ---------------------------------------------------------------------------
// Sensor maps.

namespace {

Json map_to_json(const SensorMap& map) {
  if (const auto* stereo = dynamic_cast<const StereoMap*>(&map)) {
    return Json{{"kind", "stereo"},
                {"latent_dim", stereo->latent_dim()},
                {"z_min", stereo->domain().z_min},
                {"fov", stereo->domain().fov}};
  }
  if (const auto* itd = dynamic_cast<const ItdMap*>(&map)) {
    const ItdConfig& cfg = itd->config();
    return Json{{"kind", "itd"},
                {"mic1", to_json(cfg.mic1)},
                {"mic2", to_json(cfg.mic2)},
                {"c", cfg.c},
                {"R", cfg.R}};
  }
  throw std::invalid_argument("cannot serialize sensor map: " + map.name());
}

std::shared_ptr<const SensorMap> map_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "stereo") {
    StereoDomain domain;
    domain.z_min = j.at("z_min").get<double>();
    if (j.contains("fov")) domain.fov = j.at("fov").get<double>();
    return std::make_shared<StereoMap>(j.at("latent_dim").get<int>(), domain);
  }
  if (kind == "itd") {
    ItdConfig cfg;
    cfg.mic1 = vec_from_json(j.at("mic1"));
    cfg.mic2 = vec_from_json(j.at("mic2"));
    cfg.c = j.at("c").get<double>();
    cfg.R = j.at("R").get<double>();
    return std::make_shared<ItdMap>(cfg);
  }
  throw std::invalid_argument("unknown sensor map kind: " + kind);
}

}  // namespace

Json maps_to_json(const SensorMapPair& maps) {
  return Json{{"latent_bounds", to_json(maps.latent_bounds)},
              {"f", map_to_json(*maps.f)},
              {"g", map_to_json(*maps.g)}};
}

SensorMapPair maps_from_json(const Json& j) {
  SensorMapPair maps;
  maps.latent_bounds = box_from_json(j.at("latent_bounds"));
  maps.f = map_from_json(j.at("f"));
  maps.g = map_from_json(j.at("g"));
  maps.validate();
  return maps;
}

// ---------------------------------------------------------------------------
// Model parameters.

Json params_to_json(const ModelParams& params) {
  Json objects = Json::array();
  for (const ObjectParams& o : params.objects) {
    objects.push_back(Json{{"position", to_json(o.position)}});
  }
  Json cov_f = Json::array();
  for (const Mat& c : params.cov_f) cov_f.push_back(to_json(c));
  Json cov_g = Json::array();
  for (const Mat& c : params.cov_g) cov_g.push_back(to_json(c));
  return Json{{"priors_f", to_json(params.priors_f)},
              {"priors_g", to_json(params.priors_g)},
              {"objects", objects},
              {"cov_f", cov_f},
              {"cov_g", cov_g}};
}

ModelParams params_from_json(const Json& j) {
  ModelParams params;
  params.priors_f = vec_from_json(j.at("priors_f"));
  params.priors_g = vec_from_json(j.at("priors_g"));
  for (const Json& o : j.at("objects")) {
    params.objects.push_back(ObjectParams{vec_from_json(o.at("position"))});
  }
  for (const Json& c : j.at("cov_f")) params.cov_f.push_back(mat_from_json(c));
  for (const Json& c : j.at("cov_g")) params.cov_g.push_back(mat_from_json(c));
  params.validate();
  return params;
}

// ---------------------------------------------------------------------------
// Dataset files.

namespace {

Json labels_to_json(const VecI& labels) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < labels.size(); ++i) a.push_back(labels[i]);
  return a;
}

VecI labels_from_json(const Json& j) {
  VecI labels(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const Json& x : j) labels[i++] = x.get<int>();
  return labels;
}

}  // namespace

void save_dataset(const std::string& path, const ObservationSet& obs,
                  const SensorMapPair& maps, const DatasetMeta& meta) {
  obs.validate();
  Json header{{"format", "cmm-dataset"},
              {"version", 1},
              {"dim_f", obs.f.cols()},
              {"dim_g", obs.g.cols()},
              {"count_f", obs.count_f()},
              {"count_g", obs.count_g()},
              {"box_f", to_json(obs.box_f)},
              {"box_g", to_json(obs.box_g)},
              {"support_f", obs.support_f},
              {"support_g", obs.support_g},
              {"maps", maps_to_json(maps)}};
  if (!meta.scenario.empty()) {
    header["scenario"] = meta.scenario;
    header["seed"] = meta.seed;
  }
  if (!meta.truth.empty()) {
    Json truth = Json::array();
    for (const Vec& s : meta.truth) truth.push_back(to_json(s));
    header["truth"] = truth;
  }
  if (meta.labels_f.size() > 0) header["labels_f"] = labels_to_json(meta.labels_f);
  if (meta.labels_g.size() > 0) header["labels_g"] = labels_to_json(meta.labels_g);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << header.dump() << '\n';
  for (Eigen::Index i = 0; i < obs.count_f(); ++i) {
    out << Json{{"space", "F"}, {"v", to_json(Vec(obs.f.row(i)))}}.dump() << '\n';
  }
  for (Eigen::Index i = 0; i < obs.count_g(); ++i) {
    out << Json{{"space", "G"}, {"v", to_json(Vec(obs.g.row(i)))}}.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);

  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) fail_line(path, 1, "empty file, expected a header object");
  ++line_no;

  Json header;
  try {
    header = Json::parse(line);
  } catch (const Json::parse_error& e) {
    fail_line(path, line_no, std::string("header is not valid JSON: ") + e.what());
  }

  Dataset ds;
  try {
    if (header.value("format", "") != "cmm-dataset") {
      throw std::invalid_argument("missing format marker \"cmm-dataset\"");
    }
    ds.obs.box_f = box_from_json(header.at("box_f"));
    ds.obs.box_g = box_from_json(header.at("box_g"));
    ds.obs.support_f = header.at("support_f").get<double>();
    ds.obs.support_g = header.at("support_g").get<double>();
    ds.maps = maps_from_json(header.at("maps"));
    if (header.contains("scenario")) {
      ds.meta.scenario = header.at("scenario").get<std::string>();
      ds.meta.seed = header.value("seed", std::uint64_t{0});
    }
    if (header.contains("truth")) {
      for (const Json& s : header.at("truth")) ds.meta.truth.push_back(vec_from_json(s));
    }
    if (header.contains("labels_f")) ds.meta.labels_f = labels_from_json(header.at("labels_f"));
    if (header.contains("labels_g")) ds.meta.labels_g = labels_from_json(header.at("labels_g"));
  } catch (const std::exception& e) {
    fail_line(path, line_no, std::string("bad header: ") + e.what());
  }

  const Eigen::Index dim_f = ds.obs.box_f.dim();
  const Eigen::Index dim_g = ds.obs.box_g.dim();
  const Eigen::Index count_f = header.at("count_f").get<Eigen::Index>();
  const Eigen::Index count_g = header.at("count_g").get<Eigen::Index>();
  ds.obs.f.resize(count_f, dim_f);
  ds.obs.g.resize(count_g, dim_g);

  Eigen::Index got_f = 0;
  Eigen::Index got_g = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json row;
    try {
      row = Json::parse(line);
    } catch (const Json::parse_error& e) {
      fail_line(path, line_no, std::string("observation is not valid JSON: ") + e.what());
    }
    std::string space;
    Vec v;
    try {
      space = row.at("space").get<std::string>();
      v = vec_from_json(row.at("v"));
    } catch (const std::exception& e) {
      fail_line(path, line_no, std::string("bad observation: ") + e.what());
    }
    if (space == "F") {
      if (v.size() != dim_f) fail_line(path, line_no, "observation dimension does not match header");
      if (got_f >= count_f) fail_line(path, line_no, "more F observations than the header declares");
      ds.obs.f.row(got_f++) = v.transpose();
    } else if (space == "G") {
      if (v.size() != dim_g) fail_line(path, line_no, "observation dimension does not match header");
      if (got_g >= count_g) fail_line(path, line_no, "more G observations than the header declares");
      ds.obs.g.row(got_g++) = v.transpose();
    } else {
      fail_line(path, line_no, "space must be \"F\" or \"G\", got \"" + space + "\"");
    }
  }
  if (got_f != count_f || got_g != count_g) {
    fail_line(path, line_no,
              "observation count mismatch: header declares " + std::to_string(count_f) + " F + " +
                  std::to_string(count_g) + " G, file holds " + std::to_string(got_f) + " F + " +
                  std::to_string(got_g) + " G");
  }
  ds.obs.validate();
  if (ds.meta.labels_f.size() > 0 && ds.meta.labels_f.size() != count_f) {
    fail_line(path, 1, "labels_f length does not match count_f");
  }
  if (ds.meta.labels_g.size() > 0 && ds.meta.labels_g.size() != count_g) {
    fail_line(path, 1, "labels_g length does not match count_g");
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Reports.

Json fit_report_to_json(const FitReport& report) {
  Json trace = Json::array();
  for (double v : report.loglik_trace) trace.push_back(v);
  Json trajectory = Json::array();
  for (const std::vector<Vec>& step : report.trajectory) {
    Json positions = Json::array();
    for (const Vec& s : step) positions.push_back(to_json(s));
    trajectory.push_back(positions);
  }
  return Json{{"final_loglik", report.final_loglik},
              {"iterations_run", report.iterations_run},
              {"converged", report.converged},
              {"respawns", report.respawns},
              {"choose_fallbacks", report.choose_fallbacks},
              {"params", params_to_json(report.params)},
              {"loglik_trace", trace},
              {"trajectory", trajectory},
              {"labels_f", labels_to_json(report.assignment.labels_f)},
              {"labels_g", labels_to_json(report.assignment.labels_g)}};
}

Json select_result_to_json(const SelectResult& result) {
  Json curve = Json::array();
  for (const BicScore& b : result.curve) {
    curve.push_back(Json{{"n_objects", b.n_objects},
                         {"score", b.score},
                         {"final_loglik", b.final_loglik},
                         {"dimension", b.dimension},
                         {"fit_failed", b.fit_failed}});
  }
  return Json{{"best_n", result.best_n}, {"curve", curve}};
}

Json error_report_to_json(const ErrorReport& report) {
  Json rows = Json::array();
  for (const ObjectErrorRow& r : report.rows) {
    rows.push_back(Json{{"estimate_index", r.estimate_index},
                        {"truth_index", r.truth_index},
                        {"err_s", r.err_s},
                        {"rel_s", r.rel_s},
                        {"err_f", r.err_f},
                        {"rel_f", r.rel_f},
                        {"err_g", r.err_g},
                        {"rel_g", r.rel_g}});
  }
  return Json{{"total_s", report.total_s}, {"max_rel_s", report.max_rel_s}, {"rows", rows}};
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace cmm
