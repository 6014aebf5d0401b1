#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedsel/harness.hpp"

namespace {

struct CommonArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
  int parallelism = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_spec) {
  if (needs_spec) {
    cmd->add_option("--spec", args.spec, "spec file")->required();
  }
  cmd->add_option("--out", args.out, "output directory (default: $FEDSEL_OUT_DIR or <spec>_out)");
  cmd->add_option("--seed", args.seed, "override the spec's base seed");
  cmd->add_option("--parallelism", args.parallelism, "worker threads")->check(CLI::PositiveNumber);
}

fedsel::harness::CommandOptions to_options(const CommonArgs& args) {
  fedsel::harness::CommandOptions options;
  options.spec = args.spec;
  options.out_dir = fedsel::harness::resolve_out_dir(args.out, args.spec);
  options.seed_override = args.seed;
  options.parallelism = args.parallelism;
  return options;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated-optimization simulator with biased client selection"};
  app.require_subcommand(1);

  CommonArgs run_args, skew_args, bound_args;
  std::string freq_metrics, freq_out;

  CLI::App* run = app.add_subcommand("run", "run every (strategy, seed) experiment in a spec");
  add_common(run, run_args, true);

  CLI::App* skew = app.add_subcommand("skew", "estimate rho_bar / rho_tilde per strategy");
  add_common(skew, skew_args, true);

  CLI::App* freq = app.add_subcommand("freq", "selection-frequency profile of a run directory");
  freq->add_option("--metrics", freq_metrics, "run output directory")->required();
  freq->add_option("--out", freq_out, "output directory (default: the metrics directory)");

  CLI::App* bound = app.add_subcommand("bound", "evaluate the convergence-error bounds");
  add_common(bound, bound_args, true);

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return fedsel::harness::cmd_run(to_options(run_args), std::cerr);
  if (skew->parsed()) return fedsel::harness::cmd_skew(to_options(skew_args), std::cerr);
  if (freq->parsed()) {
    fedsel::harness::FreqOptions options;
    options.metrics_dir = freq_metrics;
    options.out_dir = freq_out.empty() ? freq_metrics : freq_out;
    return fedsel::harness::cmd_freq(options, std::cerr);
  }
  if (bound->parsed()) return fedsel::harness::cmd_bound(to_options(bound_args), std::cerr);
  return fedsel::harness::kExitConfig;
}
