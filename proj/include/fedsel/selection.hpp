#pragma once

#include <span>
#include <vector>

#include "fedsel/task.hpp"

namespace fedsel {

enum class StrategyKind { kRand, kPowD, kCPowD, kRPowD };

const char* strategy_name(StrategyKind kind);

/// Configuration for one client-selection strategy.
///
/// rand draws m clients proportionally to the data fractions, with or
/// without replacement. The pow-d family first samples a candidate set of d
/// clients without replacement proportionally to the data fractions, then
/// keeps the m candidates with the highest score (ties broken uniformly at
/// random):
///   pow-d  scores candidates by their exact local loss at the global model,
///   cpow-d scores by a mini-batch loss estimate of estimate_batch_size,
///   rpow-d scores by the last loss value each client reported; clients that
///          never reported rank above every finite value.
struct SelectionConfig {
  StrategyKind kind = StrategyKind::kRand;
  int selected_count = 1;               // m
  int candidate_count = 0;              // d (pow family), m <= d <= K
  bool with_replacement = true;         // rand only
  std::size_t estimate_batch_size = 0;  // cpow-d; 0 or >= D_k means full batch

  void validate(int client_count) const;
};

/// Server-side bookkeeping for rpow-d: the latest loss reported by each
/// client, +inf until a client reports for the first time.
struct SelectionState {
  std::vector<double> last_reported_loss;

  static SelectionState init(int client_count);
};

/// Overwrites client k's entry with its newly reported accumulated average
/// loss (the latest report wins).
void report_round_loss(SelectionState& state, int client, double accumulated_avg_loss);

/// Which clients can participate this round. alternating_groups splits the
/// clients into two fixed halves, activates them in alternate rounds, and
/// removes a uniformly random exclusion_fraction of the active half.
struct AvailabilityModel {
  enum class Mode { kAlwaysOn, kAlternatingGroups };
  Mode mode = Mode::kAlwaysOn;
  double exclusion_fraction = 0.1;
};

std::vector<int> available_pool(const AvailabilityModel& model, int client_count, int round,
                                Rng& rng);

/// `count` sequential draws proportional to `weights` with removal and
/// renormalization. Returns positions into weights/ids.
std::vector<int> weighted_sample_without_replacement(std::span<const double> weights, int count,
                                                     Rng& rng);

/// m draws proportional to p restricted to `pool`. With replacement the
/// result may contain duplicates (they act as distinct clients downstream).
std::vector<int> select_rand(const DataFractions& p, int m, bool with_replacement,
                             std::span<const int> pool, Rng& rng);

std::vector<int> select_pow_d(const Task& task, const ParamVector& global_model,
                              const SelectionConfig& config, std::span<const int> pool, Rng& rng);

std::vector<int> select_cpow_d(const Task& task, const ParamVector& global_model,
                               const SelectionConfig& config, std::span<const int> pool, Rng& rng);

std::vector<int> select_rpow_d(const SelectionState& state, const DataFractions& p,
                               const SelectionConfig& config, std::span<const int> pool, Rng& rng);

/// Dispatches on config.kind. `state` is only consulted for rpow-d.
std::vector<int> select_clients(const Task& task, const ParamVector& global_model,
                                const SelectionConfig& config, const SelectionState& state,
                                std::span<const int> pool, Rng& rng);

/// Per-client selection ratio over a history of selected sets; sums to 1.
std::vector<double> frequency_profile(const std::vector<std::vector<int>>& history,
                                      int client_count);

}  // namespace fedsel
