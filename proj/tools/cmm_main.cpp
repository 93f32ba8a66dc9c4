// Command-line front end: argument parsing only; the commands live in the
// library so tests can drive them directly.

#include "cmm/cli.hpp"

#include "CLI11.hpp"

#include <functional>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Conjugate mixture models: clustering observations from two "
               "sensor spaces tied together by known maps from a latent space"};
  app.require_subcommand(1);

  cmm::CliOptions opts;
  int exit_code = cmm::kExitOk;

  auto add_common = [&](CLI::App* cmd, bool needs_dataset) {
    cmd->add_option("-c,--config", opts.config_path, "JSON config file")->required();
    cmd->add_option("-o,--out", opts.out_path, "output file");
    cmd->add_option("-s,--set", opts.overrides,
                    "config override, dotted.path=value (value parsed as JSON)");
    cmd->add_option("-t,--threads", opts.threads,
                    "worker threads (default: config, then CMM_THREADS, then 1)");
    if (needs_dataset) {
      cmd->add_option("-d,--dataset", opts.dataset_path, "input dataset (overrides config)");
      cmd->add_option("--csv", opts.csv_path, "tabular side output");
    }
  };

  auto bind = [&](CLI::App* cmd, std::function<int(const cmm::CliOptions&, std::ostream&,
                                                   std::ostream&)> fn) {
    cmd->callback([&, fn] { exit_code = fn(opts, std::cout, std::cerr); });
  };

  CLI::App* simulate = app.add_subcommand("simulate", "generate a preset scenario dataset");
  add_common(simulate, false);
  bind(simulate, cmm::run_simulate);

  CLI::App* fit = app.add_subcommand("fit", "initialize and fit one model");
  add_common(fit, true);
  bind(fit, cmm::run_fit);

  CLI::App* bench = app.add_subcommand(
      "bench-variants", "fit several search variants from one shared initialization");
  add_common(bench, true);
  bind(bench, cmm::run_bench_variants);

  CLI::App* compare = app.add_subcommand(
      "compare-init", "score both initialization strategies across seeds and counts");
  add_common(compare, true);
  bind(compare, cmm::run_compare_init);

  CLI::App* select = app.add_subcommand("select", "pick the component count by BIC");
  add_common(select, true);
  bind(select, cmm::run_select);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cmm::kExitInputError;
  }
  return exit_code;
}
