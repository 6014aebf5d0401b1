#include "fedsel/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedsel/quadratic.hpp"

namespace fedsel {

void BoundInputs::validate() const {
  params.validate();
  if (!(gap >= 0.0)) throw std::invalid_argument("bound inputs: gap must be nonnegative");
  if (!(rho_bar > 0.0)) throw std::invalid_argument("bound inputs: rho_bar must be positive");
  if (!(rho_tilde >= rho_bar)) {
    throw std::invalid_argument("bound inputs: rho_tilde must be >= rho_bar");
  }
  if (!(initial_sq_dist >= 0.0) || !(initial_gap >= 0.0)) {
    throw std::invalid_argument("bound inputs: initial distances must be nonnegative");
  }
}

BoundTerms decaying_rate_bound(const BoundInputs& inputs, double iterations) {
  inputs.validate();
  if (!(iterations > 0.0)) throw std::invalid_argument("decaying_rate_bound: T must be positive");
  const TheoryParams& c = inputs.params;
  const double gamma = 4.0 * c.L / c.mu;
  const double tau = static_cast<double>(c.tau);
  const double m = static_cast<double>(c.m);

  const double stochastic_term = 4.0 * c.L * (32.0 * tau * tau * c.G * c.G + c.sigma * c.sigma / m) /
                                 (3.0 * c.mu * c.mu * inputs.rho_bar);
  const double gap_term = 8.0 * c.L * c.L * inputs.gap / (c.mu * c.mu);
  const double init_term = c.L * gamma * inputs.initial_sq_dist / 2.0;

  BoundTerms out;
  out.vanishing = (stochastic_term + gap_term + init_term) / (iterations + gamma);
  out.bias = (8.0 * c.L * inputs.gap / (3.0 * c.mu)) * (inputs.rho_tilde / inputs.rho_bar - 1.0);
  out.total = out.vanishing + out.bias;
  return out;
}

double fixed_rate_cap(const BoundInputs& inputs) {
  const TheoryParams& c = inputs.params;
  const double B = 1.0 + 3.0 * inputs.rho_bar / 8.0;
  return std::min(1.0 / (2.0 * c.mu * B), 1.0 / (4.0 * c.L));
}

BoundTerms fixed_rate_bound(const BoundInputs& inputs, double eta, double iterations) {
  inputs.validate();
  if (!(iterations >= 0.0)) throw std::invalid_argument("fixed_rate_bound: T must be nonnegative");
  if (!(eta > 0.0)) throw std::invalid_argument("fixed_rate_bound: eta must be positive");
  const double cap = fixed_rate_cap(inputs);
  if (eta > cap) {
    throw std::invalid_argument("fixed_rate_bound: eta exceeds the admissible cap");
  }
  const TheoryParams& c = inputs.params;
  const double tau = static_cast<double>(c.tau);
  const double m = static_cast<double>(c.m);
  const double B = 1.0 + 3.0 * inputs.rho_bar / 8.0;
  const double denom = 8.0 + 3.0 * inputs.rho_bar;
  const double C = 32.0 * tau * tau * c.G * c.G + c.sigma * c.sigma / m +
                   6.0 * inputs.rho_bar * c.L * inputs.gap;
  const double D = 2.0 * inputs.gap * (inputs.rho_tilde - inputs.rho_bar);

  BoundTerms out;
  const double decay = std::pow(1.0 - eta * c.mu * B, iterations);
  out.vanishing =
      (c.L / c.mu) * decay * (inputs.initial_gap - 4.0 * (eta * C + D) / denom);
  out.bias = 4.0 * c.L * eta * C / (c.mu * denom) +
             8.0 * c.L * inputs.gap * (inputs.rho_tilde - inputs.rho_bar) / (c.mu * denom);
  out.total = out.vanishing + out.bias;
  return out;
}

TheoryParams estimate_theory_params(const Task& task, double observed_max_grad_norm, int tau,
                                    int m, double slack) {
  const auto* quadratic = dynamic_cast<const QuadraticTask*>(&task);
  if (quadratic == nullptr) {
    throw std::invalid_argument(
        "estimate_theory_params: closed-form constants are only available for quadratic tasks");
  }
  if (!(observed_max_grad_norm >= 0.0)) {
    throw std::invalid_argument("estimate_theory_params: gradient norm must be nonnegative");
  }
  if (!(slack >= 1.0)) throw std::invalid_argument("estimate_theory_params: slack must be >= 1");

  TheoryParams params;
  params.L = 0.0;
  params.mu = std::numeric_limits<double>::infinity();
  for (int k = 0; k < quadratic->client_count(); ++k) {
    params.L = std::max(params.L, quadratic->curvature(k));
    params.mu = std::min(params.mu, quadratic->curvature(k));
  }
  params.sigma = 0.0;  // full-batch gradients
  params.G = slack * observed_max_grad_norm;
  params.tau = tau;
  params.m = m;
  params.validate();
  return params;
}

}  // namespace fedsel
