#pragma once

#include "fedsel/task.hpp"

namespace fedsel {

/// Everything the convergence-error formulas consume.
struct BoundInputs {
  TheoryParams params;
  double gap = 0.0;              // Gamma
  double rho_bar = 1.0;
  double rho_tilde = 1.0;
  double initial_sq_dist = 0.0;  // ||w(0) - w*||^2
  double initial_gap = 0.0;      // F(w(0)) - F*, used by the fixed-rate bound

  void validate() const;
};

struct BoundTerms {
  double vanishing = 0.0;
  double bias = 0.0;  // non-vanishing part
  double total = 0.0;
};

/// Error bound after T iterations under the decaying rate
/// eta_t = 1 / (mu (t + gamma)), gamma = 4L/mu:
///   vanishing = (1/(T+gamma)) [ 4L(32 tau^2 G^2 + sigma^2/m) / (3 mu^2 rho_bar)
///                               + 8 L^2 Gamma / mu^2
///                               + L gamma ||w(0)-w*||^2 / 2 ]
///   bias      = (8 L Gamma / (3 mu)) (rho_tilde/rho_bar - 1)
BoundTerms decaying_rate_bound(const BoundInputs& inputs, double iterations);

/// Largest fixed rate the fixed-rate bound admits:
/// min{ 1/(2 mu B), 1/(4L) } with B = 1 + 3 rho_bar / 8.
double fixed_rate_cap(const BoundInputs& inputs);

/// Error bound after T iterations under a fixed rate eta <= fixed_rate_cap:
///   vanishing = (L/mu) [1 - eta mu B]^T
///               (F(w(0)) - F* - 4 [eta C + 2 Gamma (rho_tilde - rho_bar)] / (8 + 3 rho_bar))
///   bias      = 4 L eta C / (mu (8 + 3 rho_bar))
///               + 8 L Gamma (rho_tilde - rho_bar) / (mu (8 + 3 rho_bar))
/// with C = 32 tau^2 G^2 + sigma^2/m + 6 rho_bar L Gamma.
BoundTerms fixed_rate_bound(const BoundInputs& inputs, double eta, double iterations);

/// Closed-form constants for a quadratic task: L = max_k h_k, mu = min_k h_k,
/// sigma = 0 (deterministic gradients); G is the largest gradient norm seen on
/// a recorded trajectory, inflated by `slack`. Throws std::invalid_argument
/// for other task kinds.
TheoryParams estimate_theory_params(const Task& task, double observed_max_grad_norm, int tau,
                                    int m, double slack = 1.1);

}  // namespace fedsel
