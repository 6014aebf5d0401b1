#pragma once

#include <cstdint>
#include <vector>

#include "fedsel/task.hpp"

namespace fedsel {

/// Strongly convex quadratic objectives
///   F_k(w) = 1/2 w'H_k w - e_k'w + 1/2 e_k'H_k^{-1} e_k,   H_k = h_k I,
/// equivalently 1/2 h_k ||w - w_k*||^2 with local optimum w_k* = e_k / h_k.
class QuadraticTask final : public Task {
 public:
  QuadraticTask(std::vector<double> curvatures, std::vector<ParamVector> linear_terms,
                DataFractions fractions);

  int client_count() const override { return static_cast<int>(curvatures_.size()); }
  int dimension() const override { return dim_; }
  const DataFractions& fractions() const override { return p_; }
  std::size_t data_size(int) const override { return 1; }

  double loss(int k, const ParamVector& w) const override;
  ParamVector gradient(int k, const ParamVector& w) const override;

  // Sample-free objective: the mini-batch estimate degenerates to the exact
  // loss/gradient and consumes no randomness.
  double estimate_loss(int k, const ParamVector& w, std::size_t batch, Rng& rng) const override;
  StochasticGradientResult stochastic_gradient(int k, const ParamVector& w, std::size_t batch,
                                               Rng& rng) const override;

  double curvature(int k) const { return curvatures_[static_cast<std::size_t>(k)]; }
  const ParamVector& linear_term(int k) const { return linear_terms_[static_cast<std::size_t>(k)]; }
  ParamVector local_optimum(int k) const;

 private:
  std::vector<double> curvatures_;        // h_k > 0
  std::vector<ParamVector> linear_terms_; // e_k
  DataFractions p_;
  int dim_ = 0;
};

/// Draws K i.i.d. power-law variates with density a x^(a-1) on (0,1]
/// (inverse CDF u^(1/a)).
std::vector<double> sample_power_law(int count, double a, Rng& rng);

/// Random task family: h_k ~ U(1,20), e_k entries ~ h_k * U(0,1) (so local
/// optima lie in the unit box and are distinct), p_k power-law normalized.
QuadraticTask generate_quadratic(int clients, int dim, double power_law_a, std::uint64_t seed);

/// Closed-form optima: w_k* = e_k / h_k (F_k* = 0) and
/// w* = (sum p_k H_k)^{-1} (sum p_k e_k).
TaskOptima quadratic_optima(const QuadraticTask& task);

}  // namespace fedsel
