#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedsel/schedule.hpp"
#include "fedsel/selection.hpp"
#include "fedsel/task.hpp"

namespace fedsel {

enum class Aggregation {
  kSimpleMean,    // plain average of the selected local models
  kWeighted,      // weights q_k = p_k K / m; requires sum q_k = 1 per round
  kDataWeighted,  // weights p_k renormalized over the selected slots
};

struct RunConfig {
  SelectionConfig selection;
  int local_steps = 1;         // tau
  int rounds = 1;              // communication rounds
  std::size_t batch_size = 0;  // 0 = full batch
  LrSchedule lr;
  Aggregation aggregation = Aggregation::kSimpleMean;
  AvailabilityModel availability;
  std::uint64_t seed = 0;
  bool record_eval_metric = false;

  void validate(const Task& task) const;
};

struct RoundRecord {
  int round = 0;
  long long iteration = 0;  // cumulative local-SGD iterations after this round
  double global_loss = 0.0;
  double eval_metric = 0.0;  // NaN when not recorded
  std::vector<int> selected;
  std::vector<double> reported_loss;  // accumulated average loss per selected slot
  double lr = 0.0;                    // rate at the round's first local iteration
  double max_grad_norm = 0.0;         // max ||g|| over this round's local steps
};

/// A local model left the finite range; carries where.
struct DivergenceError : std::runtime_error {
  DivergenceError(int round, int client);
  int round;
  int client;
};

struct LocalSgdResult {
  ParamVector model;
  double accumulated_avg_loss = 0.0;  // mean of per-step mini-batch losses
  double max_grad_norm = 0.0;
};

/// tau stochastic-gradient steps on client k starting from `start`.
/// Iterations are numbered first_iteration .. first_iteration + tau - 1 for
/// the schedule. The accumulated loss is the rpow-d report: the mean over
/// steps of the mini-batch loss at the model the batch was drawn for.
LocalSgdResult local_sgd(const ParamVector& start, const Task& task, int client, int local_steps,
                         const LrSchedule& lr, long long first_iteration, int round,
                         std::size_t batch_size, Rng& rng);

/// Weighted average of models; empty weights = uniform. Weights must be
/// nonnegative and sum to 1 within 1e-9.
ParamVector aggregate(const std::vector<ParamVector>& models, std::span<const double> weights);

/// Full FedAvg run: per round, resolve the availability pool, select clients,
/// run local SGD on each selected slot, aggregate, and record. Deterministic
/// for a fixed config and seed (per-(seed, round, slot) RNG streams).
std::vector<RoundRecord> run_training(const Task& task, const RunConfig& config);

enum class TargetMetric { kGlobalLossAtMost, kEvalAtLeast };

/// First round index whose record meets the target, if any.
std::optional<int> rounds_to_target(std::span<const RoundRecord> records, double target,
                                    TargetMetric metric);

}  // namespace fedsel
