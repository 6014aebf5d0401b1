#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsel/bounds.hpp"
#include "fedsel/engine.hpp"
#include "fedsel/skew.hpp"
#include "fedsel/task.hpp"

namespace fedsel {

/// Malformed, missing, or schema-violating spec input.
struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses the flat "key = value" format ('#' starts a comment; duplicate keys
/// are rejected).
std::map<std::string, std::string> parse_flat_spec(std::istream& in);
std::map<std::string, std::string> load_flat_spec(const std::filesystem::path& path);

/// Typed access over a parsed spec; unread keys are schema errors.
class SpecReader {
 public:
  explicit SpecReader(std::map<std::string, std::string> values, std::string origin);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key);
  std::string get_string_or(const std::string& key, const std::string& fallback);
  long long get_int(const std::string& key);
  long long get_int_or(const std::string& key, long long fallback);
  double get_double(const std::string& key);
  double get_double_or(const std::string& key, double fallback);
  bool get_bool_or(const std::string& key, bool fallback);
  std::vector<std::string> get_list(const std::string& key);        // comma separated
  std::vector<std::string> get_list_or(const std::string& key);     // empty if absent
  [[noreturn]] void fail(const std::string& message) const;

  /// Throws if any key was never consumed (catches typos under the versioned
  /// schema).
  void finish() const;

 private:
  std::string take(const std::string& key);
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> consumed_;
  std::string origin_;
};

/// Task-definition block shared by the run/skew/bound specs.
struct TaskSpec {
  enum class Kind { kQuadratic, kSynthetic };
  Kind kind = Kind::kQuadratic;
  int clients = 1;
  int dimension = 1;          // quadratic
  double power_law_a = 3.0;
  std::uint64_t task_seed = 0;
  double alpha = 1.0;         // synthetic
  double beta = 1.0;          // synthetic
  std::size_t min_client_samples = 50;
  std::size_t size_scale = 450;
  double l2 = 0.0;            // synthetic objective regularization

  static TaskSpec parse(SpecReader& reader, std::uint64_t default_seed);
  std::unique_ptr<Task> build() const;
};

/// One strategy token: rand | rand_wor | pow-d:<d> | cpow-d:<d> | rpow-d:<d>.
struct StrategySpec {
  std::string label;
  SelectionConfig config;
};

StrategySpec parse_strategy_token(const std::string& token, int selected_count,
                                  std::size_t estimate_batch_size);

struct ExperimentSpec {
  TaskSpec task;
  std::vector<StrategySpec> strategies;
  int rounds = 1;
  int local_steps = 1;
  std::size_t batch_size = 0;
  LrSchedule lr;
  Aggregation aggregation = Aggregation::kSimpleMean;
  AvailabilityModel availability;
  int num_seeds = 1;
  std::uint64_t base_seed = 1;
  std::optional<double> target_loss;
  bool eval_accuracy = false;
  bool export_dataset = false;  // synthetic runs: write dataset.txt alongside the metrics

  static ExperimentSpec load(const std::filesystem::path& path);
  RunConfig run_config(const StrategySpec& strategy, int seed_index) const;
  /// Per-run seed: base_seed + 1 + seed_index (recorded in the outputs).
  std::uint64_t run_seed(int seed_index) const { return base_seed + 1 + static_cast<std::uint64_t>(seed_index); }
};

struct SkewSpec {
  TaskSpec task;
  std::vector<StrategySpec> strategies;
  int draws = 10000;
  int grid_samples = 1000;
  int repetitions = 1;
  SkewWeighting weighting = SkewWeighting::kUniformMean;
  std::uint64_t base_seed = 1;

  static SkewSpec load(const std::filesystem::path& path);
};

struct BoundSpec {
  std::vector<double> iteration_counts;  // T values
  std::optional<double> eta;             // adds fixed-rate rows when present

  bool derive = false;
  // explicit mode
  BoundInputs inputs;
  // derive mode (quadratic tasks)
  TaskSpec task;
  StrategySpec strategy;
  int local_steps = 1;
  int draws = 10000;
  int grid_samples = 1000;
  int derive_rounds = 1000;
  double g_slack = 1.1;
  std::uint64_t base_seed = 1;

  static BoundSpec load(const std::filesystem::path& path);
};

}  // namespace fedsel
