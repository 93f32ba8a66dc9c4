#pragma once

// Command implementations behind the `cmm` executable.  Each command reads a
// JSON config file, applies dotted-path overrides, runs, writes its outputs,
// and returns a process exit code:
//   0  success
//   1  input error (bad config, bad dataset, bad arguments)
//   2  the run finished but did not converge

#include <iosfwd>
#include <string>
#include <vector>

namespace cmm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNoConvergence = 2;

struct CliOptions {
  std::string config_path;             // JSON config (required by every command)
  std::string dataset_path;            // input dataset; overrides config "dataset"
  std::string out_path;                // main output (dataset or JSON report)
  std::string csv_path;                // tabular side output where applicable
  std::vector<std::string> overrides;  // "dotted.path=value", value parsed as JSON
  int threads = 0;  // 0: config "threads", then CMM_THREADS, then 1
};

/// Generate a preset scenario dataset to `out_path`.
/// Config: {"scenario": "GoodSep", "seed": 7} plus optional
/// "inliers_per_object" and "outlier_fraction".
int run_simulate(const CliOptions& cli, std::ostream& out, std::ostream& err);

/// Initialize and fit one model.  Config: "dataset", "n_objects", optional
/// "init" and "search" blocks.  Writes a JSON report; exit 2 when the run hit
/// the iteration limit without converging.
int run_fit(const CliOptions& cli, std::ostream& out, std::ostream& err);

/// Fit every requested search variant from one shared initialization for a
/// fixed iteration budget; report per-variant iterations to 99% of achieved
/// progress and emit the per-iteration log-likelihood table as CSV.
int run_bench_variants(const CliOptions& cli, std::ostream& out, std::ostream& err);

/// Score both initialization strategies: for each component count 1..n_max
/// and each seed, build the initial model and record its log-likelihood;
/// report per-(strategy, count) means and variances.
int run_compare_init(const CliOptions& cli, std::ostream& out, std::ostream& err);

/// Sweep component counts 1..n_max and pick the information-criterion
/// minimizer.
int run_select(const CliOptions& cli, std::ostream& out, std::ostream& err);

}  // namespace cmm
