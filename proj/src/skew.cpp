#include "fedsel/skew.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace fedsel {
namespace {

constexpr double kDenominatorGuard = 1e-12;
constexpr std::uint64_t kGridWStream = 0x10;
constexpr std::uint64_t kGridWPrimeStream = 0x11;
constexpr std::uint64_t kWeightStream = 0x12;

void check_strategy(const SelectionConfig& config) {
  if (config.kind == StrategyKind::kRPowD) {
    throw std::invalid_argument(
        "selection skew: rpow-d ranks by reporting history, not by the global model, so "
        "rho(S(pi, w), w') is not defined for it");
  }
}

// F_k(w') - F_k* for all k.
std::vector<double> excess_losses(const Task& task, const TaskOptima& optima,
                                  const ParamVector& w_prime) {
  std::vector<double> excess(static_cast<std::size_t>(task.client_count()));
  for (int k = 0; k < task.client_count(); ++k) {
    excess[static_cast<std::size_t>(k)] =
        task.loss(k, w_prime) - optima.local_values[static_cast<std::size_t>(k)];
  }
  return excess;
}

std::vector<ParamVector> sample_grid_points(const GridSpec& grid, const TaskOptima& optima,
                                            std::uint64_t seed, std::uint64_t stream) {
  Rng rng = make_stream(seed, {stream});
  std::uniform_real_distribution<double> offset(-grid.half_width, grid.half_width);
  std::vector<ParamVector> points;
  points.reserve(static_cast<std::size_t>(grid.samples_per_role) + 1);
  for (int i = 0; i < grid.samples_per_role; ++i) {
    ParamVector w = grid.center;
    for (double& v : w) v += offset(rng);
    points.push_back(std::move(w));
  }
  // w* is always part of both roles; rho_tilde is read off at this index.
  points.push_back(optima.global_opt);
  return points;
}

}  // namespace

double local_global_gap(const Task& task, const TaskOptima& optima) {
  const DataFractions& p = task.fractions();
  double gap = 0.0;
  for (int k = 0; k < task.client_count(); ++k) {
    gap += p[k] * (task.loss(k, optima.global_opt) -
                   optima.local_values[static_cast<std::size_t>(k)]);
  }
  return gap;
}

std::vector<double> selection_weights(const SelectionConfig& config, const Task& task,
                                      const ParamVector& w, int draws, Rng& rng,
                                      SkewWeighting weighting) {
  check_strategy(config);
  if (draws < 1) throw std::invalid_argument("selection skew: draws must be >= 1");
  const int K = task.client_count();
  const DataFractions& p = task.fractions();
  const double m = static_cast<double>(config.selected_count);

  std::vector<int> pool(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) pool[static_cast<std::size_t>(k)] = k;
  const SelectionState unused_state;

  std::vector<double> acc(static_cast<std::size_t>(K), 0.0);
  for (int it = 0; it < draws; ++it) {
    const std::vector<int> selected = select_clients(task, w, config, unused_state, pool, rng);
    for (int k : selected) {
      const double coeff = weighting == SkewWeighting::kUniformMean
                               ? 1.0 / m
                               : p[k] * static_cast<double>(K) / m;
      acc[static_cast<std::size_t>(k)] += coeff;
    }
  }
  for (double& a : acc) a /= static_cast<double>(draws);
  return acc;
}

double selection_skew_at(const SelectionConfig& config, const Task& task,
                         const TaskOptima& optima, const ParamVector& w,
                         const ParamVector& w_prime, int draws, Rng& rng,
                         SkewWeighting weighting) {
  const DataFractions& p = task.fractions();
  const std::vector<double> excess = excess_losses(task, optima, w_prime);
  double denominator = 0.0;
  for (int k = 0; k < task.client_count(); ++k) {
    denominator += p[k] * excess[static_cast<std::size_t>(k)];
  }
  if (!(denominator > kDenominatorGuard)) {
    throw std::domain_error("selection skew: degenerate denominator at w'");
  }
  const std::vector<double> weights = selection_weights(config, task, w, draws, rng, weighting);
  double numerator = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) numerator += weights[k] * excess[k];
  return numerator / denominator;
}

GridSpec make_grid_spec(const TaskOptima& optima, int samples_per_role) {
  if (samples_per_role < 1) throw std::invalid_argument("grid spec: samples must be >= 1");
  GridSpec grid;
  grid.center = optima.global_opt;
  double max_dist = 0.0;
  for (const ParamVector& w : optima.local_opts) {
    max_dist = std::max(max_dist, std::sqrt(vec::squared_distance(w, optima.global_opt)));
  }
  // A wide box around the optima. Boxes on the scale of the optima spread
  // land in a regime where loss ranking at w anti-correlates with excess
  // loss at w', which collapses the grid minimum for greedy selections.
  grid.half_width = std::max(100.0 * max_dist, 1.0);
  grid.samples_per_role = samples_per_role;
  return grid;
}

SkewEstimate estimate_rho_bounds(const SelectionConfig& config, const Task& task,
                                 const TaskOptima& optima, const GridSpec& grid, int draws,
                                 std::uint64_t seed, SkewWeighting weighting, int threads) {
  check_strategy(config);
  const int K = task.client_count();
  const DataFractions& p = task.fractions();

  const std::vector<ParamVector> w_points =
      sample_grid_points(grid, optima, seed, kGridWStream);
  const std::vector<ParamVector> w_prime_points =
      sample_grid_points(grid, optima, seed, kGridWPrimeStream);
  // Index of w* within the w' role (appended right after the uniform samples).
  const std::size_t global_opt_index = static_cast<std::size_t>(grid.samples_per_role);

  // One selection-distribution estimate per grid w, each on its own stream.
  std::vector<std::vector<double>> weights(w_points.size());
  {
    const unsigned hw = std::thread::hardware_concurrency();
    const int worker_count =
        threads > 0 ? threads : static_cast<int>(hw > 0 ? hw : 1);
    std::vector<std::thread> workers;
    std::size_t chunk = (w_points.size() + static_cast<std::size_t>(worker_count) - 1) /
                        static_cast<std::size_t>(worker_count);
    if (chunk == 0) chunk = 1;
    for (int t = 0; t < worker_count; ++t) {
      const std::size_t begin = static_cast<std::size_t>(t) * chunk;
      if (begin >= w_points.size()) break;
      const std::size_t end = std::min(begin + chunk, w_points.size());
      workers.emplace_back([&, begin, end] {
        for (std::size_t i = begin; i < end; ++i) {
          Rng rng = make_stream(seed, {kWeightStream, static_cast<std::uint64_t>(i)});
          weights[i] = selection_weights(config, task, w_points[i], draws, rng, weighting);
        }
      });
    }
    for (std::thread& w : workers) w.join();
  }

  SkewEstimate estimate;
  estimate.gap = local_global_gap(task, optima);
  estimate.grid = grid;
  estimate.monte_carlo_draws = draws;

  double rho_min = std::numeric_limits<double>::infinity();
  double rho_tilde = -std::numeric_limits<double>::infinity();
  bool tilde_valid = false;
  int valid_points = 0;

  for (std::size_t j = 0; j < w_prime_points.size(); ++j) {
    const std::vector<double> excess = excess_losses(task, optima, w_prime_points[j]);
    double denominator = 0.0;
    for (int k = 0; k < K; ++k) denominator += p[k] * excess[static_cast<std::size_t>(k)];
    if (!(denominator > kDenominatorGuard)) {
      ++estimate.skipped_points;
      continue;
    }
    ++valid_points;
    const bool is_global_opt = j == global_opt_index;
    for (std::size_t i = 0; i < w_points.size(); ++i) {
      double numerator = 0.0;
      for (int k = 0; k < K; ++k) {
        numerator += weights[i][static_cast<std::size_t>(k)] * excess[static_cast<std::size_t>(k)];
      }
      const double rho = numerator / denominator;
      rho_min = std::min(rho_min, rho);
      if (is_global_opt) {
        rho_tilde = std::max(rho_tilde, rho);
        tilde_valid = true;
      }
    }
  }

  if (valid_points == 0) {
    throw std::domain_error("estimate_rho_bounds: every grid point was degenerate");
  }
  estimate.rho_bar = rho_min;
  if (tilde_valid) {
    estimate.rho_tilde = rho_tilde;
  } else {
    // Gamma ~ 0: rho at w* is 0/0 and selection bias cannot shift the
    // solution; report the unbiased value.
    estimate.rho_tilde = estimate.rho_bar;
    estimate.tilde_degenerate = true;
  }
  if (estimate.rho_tilde < estimate.rho_bar) {
    throw std::logic_error("estimate_rho_bounds: rho_tilde < rho_bar");
  }
  return estimate;
}

}  // namespace fedsel
