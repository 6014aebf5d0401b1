#include "fedsel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedsel {
namespace {

// Top-m candidates by score, descending, ties broken uniformly at random.
// A tie-break key is drawn for every candidate so that the stream advances
// identically whether or not ties occur.
std::vector<int> top_m_by_score(std::span<const int> candidates, std::span<const double> scores,
                                int m, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Entry {
    double score;
    double key;
    int client;
  };
  std::vector<Entry> entries(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    entries[i] = {scores[i], unit(rng), candidates[i]};
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
  });
  std::vector<int> selected(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) selected[static_cast<std::size_t>(i)] = entries[static_cast<std::size_t>(i)].client;
  return selected;
}

// Candidate set for the pow-d family: min(d, |pool|) clients sampled without
// replacement proportionally to p. d = |pool| degenerates to the whole pool.
std::vector<int> sample_candidates(const DataFractions& p, const SelectionConfig& config,
                                   std::span<const int> pool, Rng& rng) {
  const int d = std::min<int>(config.candidate_count, static_cast<int>(pool.size()));
  if (d < config.selected_count) {
    throw std::invalid_argument("selection: pool of " + std::to_string(pool.size()) +
                                " cannot supply m=" + std::to_string(config.selected_count) +
                                " clients");
  }
  if (d == static_cast<int>(pool.size())) {
    return std::vector<int>(pool.begin(), pool.end());
  }
  std::vector<double> weights(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) weights[i] = p[pool[i]];
  const std::vector<int> positions = weighted_sample_without_replacement(weights, d, rng);
  std::vector<int> candidates(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    candidates[i] = pool[static_cast<std::size_t>(positions[i])];
  }
  return candidates;
}

void check_pool(std::span<const int> pool) {
  if (pool.empty()) throw std::invalid_argument("selection: empty availability pool");
}

}  // namespace

const char* strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kRand: return "rand";
    case StrategyKind::kPowD: return "pow-d";
    case StrategyKind::kCPowD: return "cpow-d";
    case StrategyKind::kRPowD: return "rpow-d";
  }
  return "?";
}

void SelectionConfig::validate(int client_count) const {
  if (selected_count < 1) throw std::invalid_argument("selection: m must be >= 1");
  // With replacement, duplicates act as distinct clients, so m may exceed K.
  if (!(kind == StrategyKind::kRand && with_replacement) && selected_count > client_count) {
    throw std::invalid_argument("selection: m must be <= client count");
  }
  if (kind != StrategyKind::kRand) {
    if (candidate_count < selected_count || candidate_count > client_count) {
      throw std::invalid_argument("selection: need m <= d <= K for " +
                                  std::string(strategy_name(kind)));
    }
  }
}

SelectionState SelectionState::init(int client_count) {
  return SelectionState{std::vector<double>(static_cast<std::size_t>(client_count),
                                            std::numeric_limits<double>::infinity())};
}

void report_round_loss(SelectionState& state, int client, double accumulated_avg_loss) {
  state.last_reported_loss[static_cast<std::size_t>(client)] = accumulated_avg_loss;
}

std::vector<int> available_pool(const AvailabilityModel& model, int client_count, int round,
                                Rng& rng) {
  std::vector<int> pool;
  if (model.mode == AvailabilityModel::Mode::kAlwaysOn) {
    pool.resize(static_cast<std::size_t>(client_count));
    std::iota(pool.begin(), pool.end(), 0);
    return pool;
  }
  // Two fixed halves, active in alternate rounds.
  const int half = client_count / 2;
  const int begin = (round % 2 == 0) ? 0 : half;
  const int end = (round % 2 == 0) ? half : client_count;
  pool.reserve(static_cast<std::size_t>(end - begin));
  for (int k = begin; k < end; ++k) pool.push_back(k);

  const int excluded = static_cast<int>(std::lround(model.exclusion_fraction *
                                                    static_cast<double>(pool.size())));
  for (int i = 0; i < excluded && !pool.empty(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t j = pick(rng);
    pool[j] = pool.back();
    pool.pop_back();
  }
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<int> weighted_sample_without_replacement(std::span<const double> weights, int count,
                                                     Rng& rng) {
  if (count < 0 || count > static_cast<int>(weights.size())) {
    throw std::invalid_argument("weighted sampling: count out of range");
  }
  std::vector<int> positions(weights.size());
  std::iota(positions.begin(), positions.end(), 0);
  std::vector<double> w(weights.begin(), weights.end());

  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t live = w.size();
  for (int draw = 0; draw < count; ++draw) {
    double total = 0.0;
    for (std::size_t i = 0; i < live; ++i) total += w[i];
    if (!(total > 0.0)) {
      throw std::invalid_argument("weighted sampling: remaining weight is zero");
    }
    std::uniform_real_distribution<double> dist(0.0, total);
    const double u = dist(rng);
    double acc = 0.0;
    std::size_t chosen = live - 1;
    for (std::size_t i = 0; i < live; ++i) {
      acc += w[i];
      if (u < acc) {
        chosen = i;
        break;
      }
    }
    out.push_back(positions[chosen]);
    --live;
    std::swap(w[chosen], w[live]);
    std::swap(positions[chosen], positions[live]);
  }
  return out;
}

std::vector<int> select_rand(const DataFractions& p, int m, bool with_replacement,
                             std::span<const int> pool, Rng& rng) {
  check_pool(pool);
  if (m < 1) throw std::invalid_argument("select_rand: m must be >= 1");
  std::vector<double> weights(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) weights[i] = p[pool[i]];

  std::vector<int> selected;
  selected.reserve(static_cast<std::size_t>(m));
  if (with_replacement) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("select_rand: pool has zero weight");
    std::uniform_real_distribution<double> dist(0.0, total);
    for (int draw = 0; draw < m; ++draw) {
      const double u = dist(rng);
      double acc = 0.0;
      std::size_t chosen = pool.size() - 1;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        acc += weights[i];
        if (u < acc) {
          chosen = i;
          break;
        }
      }
      selected.push_back(pool[chosen]);
    }
    return selected;
  }

  if (m > static_cast<int>(pool.size())) {
    throw std::invalid_argument("select_rand: m exceeds pool size without replacement");
  }
  for (int position : weighted_sample_without_replacement(weights, m, rng)) {
    selected.push_back(pool[static_cast<std::size_t>(position)]);
  }
  return selected;
}

std::vector<int> select_pow_d(const Task& task, const ParamVector& global_model,
                              const SelectionConfig& config, std::span<const int> pool, Rng& rng) {
  check_pool(pool);
  const std::vector<int> candidates = sample_candidates(task.fractions(), config, pool, rng);
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = task.loss(candidates[i], global_model);
  }
  return top_m_by_score(candidates, scores, config.selected_count, rng);
}

std::vector<int> select_cpow_d(const Task& task, const ParamVector& global_model,
                               const SelectionConfig& config, std::span<const int> pool, Rng& rng) {
  check_pool(pool);
  const std::vector<int> candidates = sample_candidates(task.fractions(), config, pool, rng);
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = task.estimate_loss(candidates[i], global_model, config.estimate_batch_size, rng);
  }
  return top_m_by_score(candidates, scores, config.selected_count, rng);
}

std::vector<int> select_rpow_d(const SelectionState& state, const DataFractions& p,
                               const SelectionConfig& config, std::span<const int> pool, Rng& rng) {
  check_pool(pool);
  const std::vector<int> candidates = sample_candidates(p, config, pool, rng);
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = state.last_reported_loss[static_cast<std::size_t>(candidates[i])];
  }
  return top_m_by_score(candidates, scores, config.selected_count, rng);
}

std::vector<int> select_clients(const Task& task, const ParamVector& global_model,
                                const SelectionConfig& config, const SelectionState& state,
                                std::span<const int> pool, Rng& rng) {
  switch (config.kind) {
    case StrategyKind::kRand:
      return select_rand(task.fractions(), config.selected_count, config.with_replacement, pool,
                         rng);
    case StrategyKind::kPowD:
      return select_pow_d(task, global_model, config, pool, rng);
    case StrategyKind::kCPowD:
      return select_cpow_d(task, global_model, config, pool, rng);
    case StrategyKind::kRPowD:
      return select_rpow_d(state, task.fractions(), config, pool, rng);
  }
  throw std::logic_error("select_clients: unknown strategy");
}

std::vector<double> frequency_profile(const std::vector<std::vector<int>>& history,
                                      int client_count) {
  if (history.empty()) throw std::invalid_argument("frequency_profile: empty history");
  std::vector<double> counts(static_cast<std::size_t>(client_count), 0.0);
  double total = 0.0;
  for (const std::vector<int>& round : history) {
    for (int k : round) {
      counts[static_cast<std::size_t>(k)] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) {
    for (double& c : counts) c /= total;
  }
  return counts;
}

}  // namespace fedsel
