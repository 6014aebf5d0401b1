#pragma once

// Test-only oracles: finite differences, chi-square machinery and exhaustive
// enumeration of the selection strategies. Everything here is independent of
// the library's sampling/estimation code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "fedsel/task.hpp"

namespace oracles {

using fedsel::ParamVector;

// Central finite differences of a scalar function.
inline ParamVector central_difference_gradient(const std::function<double(const ParamVector&)>& f,
                                               const ParamVector& w, double step = 1e-5) {
  ParamVector g(w.size());
  ParamVector probe = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    probe[i] = w[i] + step;
    const double up = f(probe);
    probe[i] = w[i] - step;
    const double down = f(probe);
    probe[i] = w[i];
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

inline double max_relative_error(const ParamVector& a, const ParamVector& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

// One-sample chi-square statistic against expected probabilities.
inline double chi_square_statistic(const std::vector<double>& counts,
                                   const std::vector<double>& expected_probs, double total) {
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = expected_probs[i] * total;
    if (expected <= 0.0) continue;
    const double d = counts[i] - expected;
    stat += d * d / expected;
  }
  return stat;
}

// Two-sample chi-square statistic over shared categories.
inline double two_sample_chi_square(const std::vector<double>& a, const std::vector<double>& b,
                                    int* df_out) {
  double na = 0.0, nb = 0.0;
  for (double v : a) na += v;
  for (double v : b) nb += v;
  const double ra = std::sqrt(nb / na);
  const double rb = std::sqrt(na / nb);
  double stat = 0.0;
  int df = -1;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double sum = a[i] + b[i];
    if (sum <= 0.0) continue;
    const double d = a[i] * ra - b[i] * rb;
    stat += d * d / sum;
    ++df;
  }
  *df_out = df;
  return stat;
}

// Upper chi-square quantile via the Wilson-Hilferty approximation.
inline double chi_square_critical(int df, double z_upper = 2.326348 /* 99% */) {
  const double d = static_cast<double>(df);
  const double t = 1.0 - 2.0 / (9.0 * d) + z_upper * std::sqrt(2.0 / (9.0 * d));
  return d * t * t * t;
}

// Enumerates every ordered without-replacement sequence of `length` indices
// drawn proportionally to `weights`, invoking visit(sequence, probability).
inline void for_each_weighted_sequence(
    const std::vector<double>& weights, int length,
    const std::function<void(const std::vector<int>&, double)>& visit) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<int> sequence;
  std::vector<bool> used(weights.size(), false);
  std::function<void(double, double)> recurse = [&](double prob, double remaining) {
    if (static_cast<int>(sequence.size()) == length) {
      visit(sequence, prob);
      return;
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (used[i] || weights[i] <= 0.0) continue;
      used[i] = true;
      sequence.push_back(static_cast<int>(i));
      recurse(prob * weights[i] / remaining, remaining - weights[i]);
      sequence.pop_back();
      used[i] = false;
    }
  };
  recurse(1.0, total);
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double v = 1.0;
  for (int i = 0; i < k; ++i) v = v * (n - i) / (i + 1);
  return v;
}

// Exact selected-set distribution of the pow-d rule: candidates are a
// weighted without-replacement sample of size d, the m highest scores win,
// ties uniform.
inline std::map<std::set<int>, double> powd_set_distribution(const std::vector<double>& p, int d,
                                                             int m,
                                                             const std::vector<double>& scores) {
  std::map<std::set<int>, double> candidate_sets;
  for_each_weighted_sequence(p, d, [&](const std::vector<int>& seq, double prob) {
    candidate_sets[std::set<int>(seq.begin(), seq.end())] += prob;
  });

  std::map<std::set<int>, double> selected;
  for (const auto& [candidates, set_prob] : candidate_sets) {
    std::vector<double> sorted_scores;
    for (int k : candidates) sorted_scores.push_back(scores[static_cast<std::size_t>(k)]);
    std::sort(sorted_scores.begin(), sorted_scores.end(), std::greater<>());
    const double threshold = sorted_scores[static_cast<std::size_t>(m - 1)];

    std::vector<int> sure, boundary;
    for (int k : candidates) {
      if (scores[static_cast<std::size_t>(k)] > threshold) sure.push_back(k);
      else if (scores[static_cast<std::size_t>(k)] == threshold) boundary.push_back(k);
    }
    const int need = m - static_cast<int>(sure.size());
    const double tie_prob = 1.0 / binomial(static_cast<int>(boundary.size()), need);

    // Enumerate the `need`-subsets of the boundary group.
    std::vector<int> pick(static_cast<std::size_t>(need));
    std::function<void(int, int)> choose = [&](int start, int chosen) {
      if (chosen == need) {
        std::set<int> s(sure.begin(), sure.end());
        for (int i = 0; i < need; ++i) s.insert(boundary[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])]);
        selected[s] += set_prob * tie_prob;
        return;
      }
      for (int i = start; i < static_cast<int>(boundary.size()); ++i) {
        pick[static_cast<std::size_t>(chosen)] = i;
        choose(i + 1, chosen + 1);
      }
    };
    choose(0, 0);
  }
  return selected;
}

// Exact per-client mean selection mass (coefficient of F_k in the skew
// numerator) implied by a selected-set distribution.
inline std::vector<double> set_distribution_weights(const std::map<std::set<int>, double>& dist,
                                                    int client_count, int m) {
  std::vector<double> weights(static_cast<std::size_t>(client_count), 0.0);
  for (const auto& [s, prob] : dist) {
    for (int k : s) weights[static_cast<std::size_t>(k)] += prob / static_cast<double>(m);
  }
  return weights;
}

}  // namespace oracles
