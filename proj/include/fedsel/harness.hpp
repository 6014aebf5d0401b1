#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "fedsel/spec_file.hpp"

namespace fedsel::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;

struct CommandOptions {
  std::filesystem::path spec;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed_override;  // replaces base_seed
  int parallelism = 1;
};

/// Output directory resolution: explicit --out, else $FEDSEL_OUT_DIR, else
/// <spec stem>_out next to the working directory.
std::filesystem::path resolve_out_dir(const std::filesystem::path& cli_out,
                                      const std::filesystem::path& spec);

/// Runs every (strategy, seed) job of a run spec, writing one metrics file
/// and one summary per job plus task_info.txt, runs_index.csv and the
/// cross-seed comparison files. Jobs may execute in parallel; outputs are
/// byte-identical for a fixed spec and seed regardless of parallelism.
int cmd_run(const CommandOptions& options, std::ostream& diag);

/// Estimates (rho_bar, rho_tilde, Gamma) for every configured strategy and
/// writes skew_report.txt plus the skew_table.csv (strategy, d, rho_bar,
/// rho_tilde/rho_bar) table.
int cmd_skew(const CommandOptions& options, std::ostream& diag);

struct FreqOptions {
  std::filesystem::path metrics_dir;
  std::filesystem::path out_dir;
};

/// Reads the selection history out of a run output directory and writes the
/// per-strategy descending-sorted (client, ratio, p_k) table.
int cmd_freq(const FreqOptions& options, std::ostream& diag);

/// Evaluates the error-bound formulas for every requested iteration count and
/// writes bound_table.csv / bound_report.txt.
int cmd_bound(const CommandOptions& options, std::ostream& diag);

}  // namespace fedsel::harness
