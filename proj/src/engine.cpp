#include "fedsel/engine.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <string>

namespace fedsel {

namespace {
// Stream roles within one run.
constexpr std::uint64_t kAvailabilityStream = 0x41;
constexpr std::uint64_t kSelectionStream = 0x53;
constexpr std::uint64_t kLocalStream = 0x4C;
}  // namespace

LrSchedule LrSchedule::fixed(double eta) {
  LrSchedule s;
  s.kind = Kind::kFixed;
  s.base = eta;
  return s;
}

LrSchedule LrSchedule::decaying(double beta, double gamma) {
  LrSchedule s;
  s.kind = Kind::kDecay;
  s.decay_beta = beta;
  s.decay_gamma = gamma;
  return s;
}

LrSchedule LrSchedule::step_decay(double eta0, std::vector<int> rounds) {
  LrSchedule s;
  s.kind = Kind::kStepDecay;
  s.base = eta0;
  s.halving_rounds = std::move(rounds);
  return s;
}

double LrSchedule::rate_at(long long iteration, int round) const {
  switch (kind) {
    case Kind::kFixed:
      return base;
    case Kind::kDecay:
      return decay_beta / (static_cast<double>(iteration) + decay_gamma);
    case Kind::kStepDecay: {
      double eta = base;
      for (int milestone : halving_rounds) {
        if (round >= milestone) eta *= 0.5;
      }
      return eta;
    }
  }
  return base;
}

void LrSchedule::validate() const {
  switch (kind) {
    case Kind::kFixed:
    case Kind::kStepDecay:
      if (!(base > 0.0)) throw std::invalid_argument("lr schedule: rate must be positive");
      break;
    case Kind::kDecay:
      if (!(decay_beta > 0.0) || !(decay_gamma > 0.0)) {
        throw std::invalid_argument("lr schedule: decay beta and gamma must be positive");
      }
      break;
  }
  for (int r : halving_rounds) {
    if (r < 0) throw std::invalid_argument("lr schedule: negative halving round");
  }
}

void RunConfig::validate(const Task& task) const {
  selection.validate(task.client_count());
  lr.validate();
  if (local_steps < 1) throw std::invalid_argument("run config: local_steps must be >= 1");
  if (rounds < 1) throw std::invalid_argument("run config: rounds must be >= 1");
}

DivergenceError::DivergenceError(int round_, int client_)
    : std::runtime_error("divergence: non-finite " +
                         (client_ >= 0 ? "model on client " + std::to_string(client_)
                                       : std::string("aggregate")) +
                         " in round " + std::to_string(round_)),
      round(round_),
      client(client_) {}

LocalSgdResult local_sgd(const ParamVector& start, const Task& task, int client, int local_steps,
                         const LrSchedule& lr, long long first_iteration, int round,
                         std::size_t batch_size, Rng& rng) {
  LocalSgdResult res;
  res.model = start;
  double loss_sum = 0.0;
  for (int step = 0; step < local_steps; ++step) {
    const double eta = lr.rate_at(first_iteration + step, round);
    StochasticGradientResult g = task.stochastic_gradient(client, res.model, batch_size, rng);
    loss_sum += g.batch_loss;
    res.max_grad_norm = std::max(res.max_grad_norm, vec::norm(g.gradient));
    vec::axpy(-eta, g.gradient, res.model);
    if (!vec::all_finite(res.model)) throw DivergenceError(round, client);
  }
  res.accumulated_avg_loss = loss_sum / static_cast<double>(local_steps);
  return res;
}

ParamVector aggregate(const std::vector<ParamVector>& models, std::span<const double> weights) {
  if (models.empty()) throw std::invalid_argument("aggregate: no models");
  const std::size_t dim = models.front().size();
  for (const ParamVector& m : models) {
    if (m.size() != dim) throw std::invalid_argument("aggregate: dimension mismatch");
  }
  ParamVector out = vec::zeros(dim);
  if (weights.empty()) {
    const double w = 1.0 / static_cast<double>(models.size());
    for (const ParamVector& m : models) vec::axpy(w, m, out);
    return out;
  }
  if (weights.size() != models.size()) {
    throw std::invalid_argument("aggregate: weight/model count mismatch");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("aggregate: weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("aggregate: weights must sum to 1 within 1e-9 (got " +
                                std::to_string(sum) + ")");
  }
  for (std::size_t i = 0; i < models.size(); ++i) vec::axpy(weights[i], models[i], out);
  return out;
}

std::vector<RoundRecord> run_training(const Task& task, const RunConfig& config) {
  config.validate(task);
  const int K = task.client_count();
  const int m = config.selection.selected_count;
  const DataFractions& p = task.fractions();

  ParamVector global_model = vec::zeros(static_cast<std::size_t>(task.dimension()));
  SelectionState state = SelectionState::init(K);
  std::vector<RoundRecord> records;
  records.reserve(static_cast<std::size_t>(config.rounds));
  bool warned_small_pool = false;

  for (int round = 0; round < config.rounds; ++round) {
    Rng availability_rng = make_stream(config.seed, {kAvailabilityStream, static_cast<std::uint64_t>(round)});
    const std::vector<int> pool =
        available_pool(config.availability, K, round, availability_rng);

    if (config.selection.kind != StrategyKind::kRand &&
        static_cast<int>(pool.size()) < config.selection.candidate_count && !warned_small_pool) {
      std::cerr << "fedsel: round " << round << ": pool of " << pool.size()
                << " clients is smaller than d=" << config.selection.candidate_count
                << "; clamping candidate count\n";
      warned_small_pool = true;
    }

    Rng selection_rng = make_stream(config.seed, {kSelectionStream, static_cast<std::uint64_t>(round)});
    const std::vector<int> selected =
        select_clients(task, global_model, config.selection, state, pool, selection_rng);

    const long long first_iteration =
        static_cast<long long>(round) * static_cast<long long>(config.local_steps);

    std::vector<ParamVector> local_models(selected.size());
    std::vector<double> reported(selected.size());
    double round_max_grad = 0.0;
    for (std::size_t slot = 0; slot < selected.size(); ++slot) {
      Rng local_rng = make_stream(config.seed, {kLocalStream, static_cast<std::uint64_t>(round),
                                                static_cast<std::uint64_t>(slot)});
      LocalSgdResult res = local_sgd(global_model, task, selected[slot], config.local_steps,
                                     config.lr, first_iteration, round, config.batch_size,
                                     local_rng);
      local_models[slot] = std::move(res.model);
      reported[slot] = res.accumulated_avg_loss;
      round_max_grad = std::max(round_max_grad, res.max_grad_norm);
    }

    if (config.selection.kind == StrategyKind::kRPowD) {
      for (std::size_t slot = 0; slot < selected.size(); ++slot) {
        report_round_loss(state, selected[slot], reported[slot]);
      }
    }

    std::vector<double> weights;
    if (config.aggregation == Aggregation::kWeighted) {
      weights.resize(selected.size());
      for (std::size_t slot = 0; slot < selected.size(); ++slot) {
        weights[slot] = p[selected[slot]] * static_cast<double>(K) / static_cast<double>(m);
      }
    } else if (config.aggregation == Aggregation::kDataWeighted) {
      weights.resize(selected.size());
      double sum = 0.0;
      for (std::size_t slot = 0; slot < selected.size(); ++slot) {
        weights[slot] = p[selected[slot]];
        sum += weights[slot];
      }
      for (double& w : weights) w /= sum;
    }
    global_model = aggregate(local_models, weights);
    if (!vec::all_finite(global_model)) throw DivergenceError(round, -1);

    RoundRecord rec;
    rec.round = round;
    rec.iteration = first_iteration + config.local_steps;
    rec.global_loss = global_loss(task, global_model);
    if (!std::isfinite(rec.global_loss)) throw DivergenceError(round, -1);
    rec.eval_metric = config.record_eval_metric ? task.eval_metric(global_model)
                                                : std::numeric_limits<double>::quiet_NaN();
    rec.selected = selected;
    rec.reported_loss = std::move(reported);
    rec.lr = config.lr.rate_at(first_iteration, round);
    rec.max_grad_norm = round_max_grad;
    records.push_back(std::move(rec));
  }
  return records;
}

std::optional<int> rounds_to_target(std::span<const RoundRecord> records, double target,
                                    TargetMetric metric) {
  if (records.empty()) throw std::invalid_argument("rounds_to_target: no records");
  for (const RoundRecord& rec : records) {
    const bool hit = metric == TargetMetric::kGlobalLossAtMost
                         ? rec.global_loss <= target
                         : rec.eval_metric >= target;
    if (hit) return rec.round;
  }
  return std::nullopt;
}

}  // namespace fedsel
