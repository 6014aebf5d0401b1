#pragma once

#include <functional>

#include "fedsel/task.hpp"

namespace fedsel {

struct ObjectiveEval {
  double value = 0.0;
  ParamVector gradient;
};

using Objective = std::function<ObjectiveEval(const ParamVector&)>;

struct MinimizeOptions {
  double grad_tol = 1e-8;
  int max_iterations = 20000;
  int memory = 10;  // L-BFGS history length
};

struct MinimizeResult {
  ParamVector x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Limited-memory BFGS with Armijo backtracking. Intended for the smooth
/// convex objectives in this project.
MinimizeResult minimize_lbfgs(const Objective& objective, ParamVector x0,
                              const MinimizeOptions& options = {});

/// Minimizes F and every F_k numerically (gradient norm <= options.grad_tol).
/// Used for objectives without closed-form optima; throws std::runtime_error
/// if any minimization fails to converge.
TaskOptima numeric_optima(const Task& task, const MinimizeOptions& options = {});

}  // namespace fedsel
