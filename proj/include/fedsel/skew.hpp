#pragma once

#include <cstdint>
#include <vector>

#include "fedsel/selection.hpp"
#include "fedsel/task.hpp"

namespace fedsel {

/// How the selected clients' losses enter the skew numerator: uniform 1/m per
/// slot, or the data-weighted coefficients q_k = p_k K / m.
enum class SkewWeighting { kUniformMean, kDataWeighted };

/// Local-global objective gap: sum_k p_k (F_k(w*) - F_k*), >= 0.
double local_global_gap(const Task& task, const TaskOptima& optima);

/// Monte-Carlo estimate of the mean selection mass per client: the expected
/// coefficient of F_k in the skew numerator when strategy `config` selects at
/// global model `w`. Supports rand, pow-d and cpow-d.
std::vector<double> selection_weights(const SelectionConfig& config, const Task& task,
                                      const ParamVector& w, int draws, Rng& rng,
                                      SkewWeighting weighting = SkewWeighting::kUniformMean);

/// Selection skew rho(S(pi, w), w'): expected selected-client mean excess loss
/// at w' over the population value. Throws std::domain_error when the
/// denominator F(w') - sum_k p_k F_k* is not positive.
double selection_skew_at(const SelectionConfig& config, const Task& task,
                         const TaskOptima& optima, const ParamVector& w,
                         const ParamVector& w_prime, int draws, Rng& rng,
                         SkewWeighting weighting = SkewWeighting::kUniformMean);

/// Uniform sampling box for the rho grid search: centered at w*, half-width
/// 100 * max_k ||w_k* - w*|| (at least 1), with w* appended to both sample
/// roles.
struct GridSpec {
  ParamVector center;
  double half_width = 1.0;
  int samples_per_role = 1000;
};

GridSpec make_grid_spec(const TaskOptima& optima, int samples_per_role = 1000);

struct SkewEstimate {
  double rho_bar = 0.0;    // min over grid pairs of rho(w, w')
  double rho_tilde = 0.0;  // max over grid w of rho(w, w*)
  double gap = 0.0;        // Gamma
  GridSpec grid;
  int monte_carlo_draws = 0;
  int skipped_points = 0;        // w' points with denominator below the guard
  bool tilde_degenerate = false; // gap ~ 0: rho at w* is 0/0, reported as rho_bar
};

/// Grid estimate of (rho_bar, rho_tilde, Gamma). The selection distribution
/// is estimated once per grid w with `draws` Monte-Carlo selections, then
/// combined with every grid w'. Grid points whose denominator falls below
/// 1e-12 are skipped and counted. Evaluation parallelizes over grid points
/// (threads = 0 picks the hardware count); results do not depend on the
/// thread count.
SkewEstimate estimate_rho_bounds(const SelectionConfig& config, const Task& task,
                                 const TaskOptima& optima, const GridSpec& grid, int draws,
                                 std::uint64_t seed,
                                 SkewWeighting weighting = SkewWeighting::kUniformMean,
                                 int threads = 0);

}  // namespace fedsel
