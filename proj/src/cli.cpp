#include "cmm/cli.hpp"

#include "cmm/init.hpp"
#include "cmm/io.hpp"
#include "cmm/rng.hpp"
#include "cmm/select.hpp"
#include "cmm/sim.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <sstream>

namespace cmm {
namespace {

// Stream tag separating initialization draws from the fit's own per-iteration
// streams derived from the same seed.
constexpr std::uint64_t kInitStream = 0x1417;

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument(what); }

Json parse_override_value(const std::string& text) {
  Json v = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded()) return Json(text);  // bare words become strings
  return v;
}

void apply_override(Json& cfg, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    fail("override must look like dotted.path=value, got \"" + spec + "\"");
  }
  const std::string path = spec.substr(0, eq);
  Json* cur = &cfg;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
    if (key.empty()) fail("override path has an empty segment: \"" + spec + "\"");
    if (dot == std::string::npos) {
      (*cur)[key] = parse_override_value(spec.substr(eq + 1));
      return;
    }
    cur = &(*cur)[key];
    begin = dot + 1;
  }
}

Json load_config(const CliOptions& cli) {
  if (cli.config_path.empty()) fail("no config file given");
  Json cfg;
  try {
    cfg = Json::parse(read_text_file(cli.config_path));
  } catch (const Json::parse_error& e) {
    fail(cli.config_path + ": not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) fail(cli.config_path + ": config must be a JSON object");
  for (const std::string& spec : cli.overrides) apply_override(cfg, spec);
  return cfg;
}

int resolve_threads(const CliOptions& cli, const Json& cfg) {
  if (cli.threads > 0) return cli.threads;
  if (cfg.contains("threads")) {
    const int t = cfg.at("threads").get<int>();
    if (t > 0) return t;
  }
  if (const char* env = std::getenv("CMM_THREADS")) {
    char* end = nullptr;
    const long t = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && t > 0) return static_cast<int>(t);
  }
  return 1;
}

SearchOptions search_from_config(const Json& cfg) {
  SearchOptions o;
  if (!cfg.contains("search")) return o;
  const Json& s = cfg.at("search");
  if (s.contains("variant")) o.variant = variant_from_string(s.at("variant").get<std::string>());
  o.max_em_iters = s.value("max_em_iters", o.max_em_iters);
  o.mstep_iters = s.value("mstep_iters", o.mstep_iters);
  o.manifold_samples = s.value("manifold_samples", o.manifold_samples);
  o.global_samples = s.value("global_samples", o.global_samples);
  o.likelihood_tol = s.value("likelihood_tol", o.likelihood_tol);
  o.regularization = s.value("regularization", o.regularization);
  o.converge_early = s.value("converge_early", o.converge_early);
  o.seed = s.value("seed", o.seed);
  return o;
}

InitOptions init_from_config(const Json& cfg) {
  InitOptions o;
  if (!cfg.contains("init")) return o;
  const Json& s = cfg.at("init");
  if (s.contains("strategy")) {
    o.strategy = init_strategy_from_string(s.at("strategy").get<std::string>());
  }
  o.bandwidth_f = s.value("bandwidth_f", o.bandwidth_f);
  o.bandwidth_g = s.value("bandwidth_g", o.bandwidth_g);
  o.bandwidth_s = s.value("bandwidth_s", o.bandwidth_s);
  o.rarefy_f = s.value("rarefy_f", o.rarefy_f);
  o.rarefy_g = s.value("rarefy_g", o.rarefy_g);
  o.rarefy_s = s.value("rarefy_s", o.rarefy_s);
  o.knn_k = s.value("knn_k", o.knn_k);
  o.restarts = s.value("restarts", o.restarts);
  return o;
}

Dataset load_input_dataset(const CliOptions& cli, const Json& cfg, std::string* path_out) {
  std::string path = cli.dataset_path;
  if (path.empty() && cfg.contains("dataset")) path = cfg.at("dataset").get<std::string>();
  if (path.empty()) fail("no dataset given (--dataset flag or config key \"dataset\")");
  if (path_out != nullptr) *path_out = path;
  return load_dataset(path);
}

int require_n_objects(const Json& cfg) {
  if (!cfg.contains("n_objects")) fail("config key \"n_objects\" is required");
  const int n = cfg.at("n_objects").get<int>();
  if (n < 1) fail("n_objects must be at least 1");
  return n;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// First trace index reaching 99% of the achieved log-likelihood progress.
int iters_to_99(const std::vector<double>& trace) {
  if (trace.size() < 2) return 0;
  const double l0 = trace.front();
  const double span = trace.back() - l0;
  if (!(span > 0.0)) return 0;
  for (std::size_t q = 0; q < trace.size(); ++q) {
    if (trace[q] - l0 >= 0.99 * span) return static_cast<int>(q);
  }
  return static_cast<int>(trace.size() - 1);
}

void emit_main_output(const CliOptions& cli, const Json& j, std::ostream& out) {
  if (cli.out_path.empty()) return;
  write_text_file(cli.out_path, j.dump(2) + "\n");
  out << "report written: " << cli.out_path << "\n";
}

double sample_mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = sample_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

}  // namespace

// ---------------------------------------------------------------------------

int run_simulate(const CliOptions& cli, std::ostream& out, std::ostream& err) try {
  const Json cfg = load_config(cli);
  if (cli.out_path.empty()) fail("simulate needs --out for the dataset file");
  if (!cfg.contains("scenario")) fail("config key \"scenario\" is required");

  Scenario sc = scenario_preset(cfg.at("scenario").get<std::string>());
  const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
  if (cfg.contains("inliers_per_object")) {
    const int n = cfg.at("inliers_per_object").get<int>();
    sc.inliers_f_per_object = n;
    sc.inliers_g_per_object = n;
  }
  sc.outlier_fraction = cfg.value("outlier_fraction", sc.outlier_fraction);

  const SensorMapPair maps = preset_maps(sc);
  Rng rng = make_rng(seed);
  const SimResult sim = simulate(sc, maps, rng);

  DatasetMeta meta;
  meta.scenario = sc.name;
  meta.seed = seed;
  meta.truth = sc.truth;
  meta.labels_f = sim.labels_f;
  meta.labels_g = sim.labels_g;
  save_dataset(cli.out_path, sim.obs, maps, meta);

  out << "simulate: scenario=" << sc.name << " seed=" << seed << " F=" << sim.obs.count_f()
      << " G=" << sim.obs.count_g() << " -> " << cli.out_path << "\n";
  return kExitOk;
} catch (const std::exception& e) {
  err << "error: " << e.what() << "\n";
  return kExitInputError;
}

// ---------------------------------------------------------------------------

int run_fit(const CliOptions& cli, std::ostream& out, std::ostream& err) try {
  const Json cfg = load_config(cli);
  std::string dataset_path;
  const Dataset ds = load_input_dataset(cli, cfg, &dataset_path);
  const int n = require_n_objects(cfg);

  SearchOptions sopts = search_from_config(cfg);
  sopts.threads = resolve_threads(cli, cfg);
  const InitOptions iopts = init_from_config(cfg);

  Rng rng = make_rng(sopts.seed, kInitStream);
  const InitResult init = run_init(ds.obs, ds.maps, n, iopts, rng);
  const FitReport rep = fit(ds.obs, n, init.params, ds.maps, sopts);

  Json j{{"command", "fit"},
         {"dataset", dataset_path},
         {"n_objects", n},
         {"variant", to_string(sopts.variant)},
         {"init_strategy", to_string(iopts.strategy)},
         {"padded_init", init.padded},
         {"report", fit_report_to_json(rep)}};
  if (!ds.meta.truth.empty() && rep.params.n_objects() > 0) {
    const ErrorReport errors = error_report(rep.params, ds.meta.truth, ds.maps);
    j["errors"] = error_report_to_json(errors);
    out << "fit: max relative position error " << fmt_double(errors.max_rel_s) << "\n";
  }
  out << "fit: N=" << n << " variant=" << to_string(sopts.variant)
      << " loglik=" << fmt_double(rep.final_loglik) << " iterations=" << rep.iterations_run
      << " converged=" << (rep.converged ? "yes" : "no") << " respawns=" << rep.respawns << "\n";
  emit_main_output(cli, j, out);
  return rep.converged ? kExitOk : kExitNoConvergence;
} catch (const std::exception& e) {
  err << "error: " << e.what() << "\n";
  return kExitInputError;
}

// ---------------------------------------------------------------------------

int run_bench_variants(const CliOptions& cli, std::ostream& out, std::ostream& err) try {
  const Json cfg = load_config(cli);
  std::string dataset_path;
  const Dataset ds = load_input_dataset(cli, cfg, &dataset_path);
  const int n = require_n_objects(cfg);

  SearchOptions sopts = search_from_config(cfg);
  sopts.threads = resolve_threads(cli, cfg);
  sopts.converge_early = false;  // shared trace length across variants

  std::vector<Variant> variants;
  if (cfg.contains("variants")) {
    for (const Json& v : cfg.at("variants")) {
      variants.push_back(variant_from_string(v.get<std::string>()));
    }
  } else {
    variants = {Variant::IPBA, Variant::IGAA, Variant::IVAA, Variant::IPAA, Variant::IAAA};
  }
  if (variants.empty()) fail("config key \"variants\" must not be empty");

  Rng rng = make_rng(sopts.seed, kInitStream);
  const InitResult init = run_init(ds.obs, ds.maps, n, init_from_config(cfg), rng);

  Json summary = Json::array();
  std::vector<std::vector<double>> traces;
  for (const Variant v : variants) {
    sopts.variant = v;
    const FitReport rep = fit(ds.obs, n, init.params, ds.maps, sopts);
    const int reach = iters_to_99(rep.loglik_trace);
    summary.push_back(Json{{"variant", to_string(v)},
                           {"final_loglik", rep.final_loglik},
                           {"iters_to_99", reach},
                           {"respawns", rep.respawns},
                           {"choose_fallbacks", rep.choose_fallbacks}});
    traces.push_back(rep.loglik_trace);
    out << "bench: " << to_string(v) << " final=" << fmt_double(rep.final_loglik)
        << " iters_to_99=" << reach << "\n";
  }

  if (!cli.csv_path.empty()) {
    std::ostringstream csv;
    csv << "iteration";
    for (const Variant v : variants) csv << "," << to_string(v);
    csv << "\n";
    std::size_t rows = 0;
    for (const auto& t : traces) rows = std::max(rows, t.size());
    for (std::size_t i = 0; i < rows; ++i) {
      csv << i;
      for (const auto& t : traces) {
        csv << ",";
        if (i < t.size()) csv << fmt_double(t[i]);
      }
      csv << "\n";
    }
    write_text_file(cli.csv_path, csv.str());
    out << "trace table written: " << cli.csv_path << "\n";
  }

  emit_main_output(cli,
                   Json{{"command", "bench-variants"},
                        {"dataset", dataset_path},
                        {"n_objects", n},
                        {"iterations", sopts.max_em_iters},
                        {"variants", summary}},
                   out);
  return kExitOk;
} catch (const std::exception& e) {
  err << "error: " << e.what() << "\n";
  return kExitInputError;
}

// ---------------------------------------------------------------------------

int run_compare_init(const CliOptions& cli, std::ostream& out, std::ostream& err) try {
  const Json cfg = load_config(cli);
  std::string dataset_path;
  const Dataset ds = load_input_dataset(cli, cfg, &dataset_path);

  const int n_max = cfg.value("n_max", 5);
  if (n_max < 1) fail("n_max must be at least 1");
  std::vector<std::uint64_t> seeds;
  if (cfg.contains("seeds")) {
    for (const Json& s : cfg.at("seeds")) seeds.push_back(s.get<std::uint64_t>());
  } else {
    const int n_seeds = cfg.value("n_seeds", 10);
    for (int s = 1; s <= n_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (seeds.empty()) fail("config key \"seeds\" must not be empty");

  InitOptions iopts = init_from_config(cfg);

  Json rows = Json::array();
  std::ostringstream csv;
  csv << "strategy,n_objects,mean,variance,failures";
  for (std::size_t i = 0; i < seeds.size(); ++i) csv << ",seed" << seeds[i];
  csv << "\n";

  for (const InitStrategy strategy : {InitStrategy::OSC, InitStrategy::PSC}) {
    iopts.strategy = strategy;
    const std::uint64_t strategy_tag = strategy == InitStrategy::OSC ? 1 : 2;
    for (int n = 1; n <= n_max; ++n) {
      std::vector<double> values;
      Json value_list = Json::array();
      int failures = 0;
      for (const std::uint64_t seed : seeds) {
        try {
          Rng rng = make_rng(seed, kInitStream, strategy_tag, static_cast<std::uint64_t>(n));
          const InitResult init = run_init(ds.obs, ds.maps, n, iopts, rng);
          const double ll = log_likelihood(ds.obs, init.params, ds.maps);
          values.push_back(ll);
          value_list.push_back(ll);
        } catch (const std::exception&) {
          ++failures;
          value_list.push_back(nullptr);
        }
      }
      const double mean = sample_mean(values);
      const double variance = sample_variance(values);
      rows.push_back(Json{{"strategy", to_string(strategy)},
                          {"n_objects", n},
                          {"mean", mean},
                          {"variance", variance},
                          {"failures", failures},
                          {"values", value_list}});
      csv << to_string(strategy) << "," << n << "," << fmt_double(mean) << ","
          << fmt_double(variance) << "," << failures;
      for (const Json& v : value_list) {
        csv << ",";
        if (v.is_number()) csv << fmt_double(v.get<double>());
      }
      csv << "\n";
      out << "compare-init: " << to_string(strategy) << " N=" << n
          << " mean=" << fmt_double(mean) << " var=" << fmt_double(variance)
          << (failures > 0 ? " failures=" + std::to_string(failures) : "") << "\n";
    }
  }

  if (!cli.csv_path.empty()) {
    write_text_file(cli.csv_path, csv.str());
    out << "table written: " << cli.csv_path << "\n";
  }
  emit_main_output(cli,
                   Json{{"command", "compare-init"},
                        {"dataset", dataset_path},
                        {"n_max", n_max},
                        {"rows", rows}},
                   out);
  return kExitOk;
} catch (const std::exception& e) {
  err << "error: " << e.what() << "\n";
  return kExitInputError;
}

// ---------------------------------------------------------------------------

int run_select(const CliOptions& cli, std::ostream& out, std::ostream& err) try {
  const Json cfg = load_config(cli);
  std::string dataset_path;
  const Dataset ds = load_input_dataset(cli, cfg, &dataset_path);

  const int n_max = cfg.value("n_max", 5);
  if (n_max < 1) fail("n_max must be at least 1");
  SearchOptions sopts = search_from_config(cfg);
  sopts.threads = resolve_threads(cli, cfg);
  const InitOptions iopts = init_from_config(cfg);

  const SelectResult res = select_n(ds.obs, ds.maps, n_max, sopts, iopts);

  for (const BicScore& b : res.curve) {
    out << "select: N=" << b.n_objects << " score="
        << (b.fit_failed ? "failed" : fmt_double(b.score)) << "\n";
  }
  out << "select: best N=" << res.best_n << "\n";

  if (!cli.csv_path.empty()) {
    std::ostringstream csv;
    csv << "n_objects,score,final_loglik,dimension,fit_failed\n";
    for (const BicScore& b : res.curve) {
      csv << b.n_objects << "," << fmt_double(b.score) << "," << fmt_double(b.final_loglik) << ","
          << b.dimension << "," << (b.fit_failed ? 1 : 0) << "\n";
    }
    write_text_file(cli.csv_path, csv.str());
    out << "curve written: " << cli.csv_path << "\n";
  }

  Json j = select_result_to_json(res);
  j["command"] = "select";
  j["dataset"] = dataset_path;
  emit_main_output(cli, j, out);

  const std::size_t best_idx = static_cast<std::size_t>(res.best_n - 1);
  if (best_idx >= res.curve.size() || res.curve[best_idx].fit_failed) return kExitInputError;
  return res.fits[best_idx].converged ? kExitOk : kExitNoConvergence;
} catch (const std::exception& e) {
  err << "error: " << e.what() << "\n";
  return kExitInputError;
}

}  // namespace cmm
