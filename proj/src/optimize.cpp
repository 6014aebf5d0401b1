#include "fedsel/optimize.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

namespace fedsel {

MinimizeResult minimize_lbfgs(const Objective& objective, ParamVector x0,
                              const MinimizeOptions& options) {
  const std::size_t n = x0.size();
  MinimizeResult res;
  res.x = std::move(x0);

  ObjectiveEval cur = objective(res.x);

  struct Pair {
    ParamVector s, y;
    double rho;
  };
  std::deque<Pair> history;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    res.grad_norm = vec::norm(cur.gradient);
    if (res.grad_norm <= options.grad_tol) {
      res.value = cur.value;
      res.iterations = iter;
      res.converged = true;
      return res;
    }

    // Two-loop recursion for the search direction.
    ParamVector q = cur.gradient;
    std::vector<double> alpha(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
      alpha[i] = history[i].rho * vec::dot(history[i].s, q);
      vec::axpy(-alpha[i], history[i].y, q);
    }
    if (!history.empty()) {
      const Pair& last = history.back();
      const double scale = vec::dot(last.s, last.y) / vec::dot(last.y, last.y);
      vec::scale(q, scale);
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
      const double beta = history[i].rho * vec::dot(history[i].y, q);
      vec::axpy(alpha[i] - beta, history[i].s, q);
    }
    for (double& v : q) v = -v;  // descent direction

    double slope = vec::dot(cur.gradient, q);
    if (!(slope < 0.0)) {
      // Fall back to steepest descent if curvature information is unusable.
      q = cur.gradient;
      for (double& v : q) v = -v;
      slope = -vec::squared_norm(cur.gradient);
      history.clear();
    }

    // Armijo backtracking.
    double step = 1.0;
    ObjectiveEval next;
    ParamVector x_next(n);
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_next[i] = res.x[i] + step * q[i];
      next = objective(x_next);
      if (std::isfinite(next.value) && next.value <= cur.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.value = cur.value;
      res.iterations = iter;
      res.converged = res.grad_norm <= options.grad_tol;
      return res;
    }

    Pair pair;
    pair.s.resize(n);
    pair.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      pair.s[i] = x_next[i] - res.x[i];
      pair.y[i] = next.gradient[i] - cur.gradient[i];
    }
    const double sy = vec::dot(pair.s, pair.y);
    if (sy > 1e-12) {
      pair.rho = 1.0 / sy;
      history.push_back(std::move(pair));
      if (static_cast<int>(history.size()) > options.memory) history.pop_front();
    }

    res.x = std::move(x_next);
    x_next.resize(n);
    cur = std::move(next);
  }

  res.value = cur.value;
  res.grad_norm = vec::norm(cur.gradient);
  res.iterations = options.max_iterations;
  res.converged = res.grad_norm <= options.grad_tol;
  return res;
}

TaskOptima numeric_optima(const Task& task, const MinimizeOptions& options) {
  const int K = task.client_count();
  const DataFractions& p = task.fractions();
  const ParamVector x0 = vec::zeros(static_cast<std::size_t>(task.dimension()));

  auto global_objective = [&](const ParamVector& w) {
    ObjectiveEval eval;
    eval.value = 0.0;
    eval.gradient = vec::zeros(w.size());
    for (int k = 0; k < K; ++k) {
      eval.value += p[k] * task.loss(k, w);
      vec::axpy(p[k], task.gradient(k, w), eval.gradient);
    }
    return eval;
  };

  TaskOptima out;
  MinimizeResult global = minimize_lbfgs(global_objective, x0, options);
  if (!global.converged) {
    throw std::runtime_error("numeric_optima: global minimization did not reach tolerance (|g|=" +
                             std::to_string(global.grad_norm) + ")");
  }
  out.global_opt = std::move(global.x);
  out.global_value = global.value;

  out.local_opts.reserve(static_cast<std::size_t>(K));
  out.local_values.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    auto local_objective = [&, k](const ParamVector& w) {
      return ObjectiveEval{task.loss(k, w), task.gradient(k, w)};
    };
    MinimizeResult local = minimize_lbfgs(local_objective, x0, options);
    if (!local.converged) {
      throw std::runtime_error("numeric_optima: client " + std::to_string(k) +
                               " minimization did not reach tolerance (|g|=" +
                               std::to_string(local.grad_norm) + ")");
    }
    out.local_opts.push_back(std::move(local.x));
    out.local_values.push_back(local.value);
  }
  return out;
}

}  // namespace fedsel
