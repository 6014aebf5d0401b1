#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "fedsel/rng.hpp"
#include "fedsel/vec.hpp"

namespace fedsel {

/// Per-client data fractions p_k (p_k >= 0, sum = 1 within 1e-9).
struct DataFractions {
  std::vector<double> p;

  int size() const { return static_cast<int>(p.size()); }
  double operator[](int k) const { return p[static_cast<std::size_t>(k)]; }

  void validate() const;

  /// Normalizes nonnegative raw weights to fractions. Throws if the sum is
  /// not positive or any entry is negative/non-finite.
  static DataFractions normalized(std::vector<double> raw);
};

struct StochasticGradientResult {
  ParamVector gradient;  // mini-batch gradient estimate
  double batch_loss;     // mean loss over the same mini-batch
};

/// An objective family F(w) = sum_k p_k F_k(w).
///
/// Tasks are immutable after construction and safe to share across threads;
/// all evaluations are pure. Randomness (mini-batch sampling) comes from the
/// caller-provided stream.
class Task {
 public:
  virtual ~Task() = default;

  virtual int client_count() const = 0;
  virtual int dimension() const = 0;
  virtual const DataFractions& fractions() const = 0;

  /// Number of samples held by client k (1 for sample-free objectives).
  virtual std::size_t data_size(int k) const = 0;

  /// Exact local objective F_k(w).
  virtual double loss(int k, const ParamVector& w) const = 0;

  /// Exact local gradient (full batch).
  virtual ParamVector gradient(int k, const ParamVector& w) const = 0;

  /// Mean loss over one uniformly sampled mini-batch of `batch` samples.
  /// `batch` >= data_size(k) degenerates to the exact loss and consumes no
  /// randomness. Sample-free objectives always return the exact loss.
  virtual double estimate_loss(int k, const ParamVector& w, std::size_t batch, Rng& rng) const = 0;

  /// Mini-batch stochastic gradient plus the batch mean loss, with
  /// E[gradient] equal to the exact gradient. Same full-batch degeneration
  /// as estimate_loss.
  virtual StochasticGradientResult stochastic_gradient(int k, const ParamVector& w,
                                                       std::size_t batch, Rng& rng) const = 0;

  /// Optional evaluation metric (e.g. training accuracy); NaN when the task
  /// does not define one.
  virtual double eval_metric(const ParamVector& /*w*/) const;
};

/// Global objective F(w) = sum_k p_k F_k(w).
double global_loss(const Task& task, const ParamVector& w);

/// Minimizers and optimal values of F and every F_k.
struct TaskOptima {
  ParamVector global_opt;                // w*
  double global_value = 0.0;             // F* = F(w*)
  std::vector<ParamVector> local_opts;   // w_k*
  std::vector<double> local_values;      // F_k* = F_k(w_k*)
};

/// Constants of the smooth strongly-convex setting plus the run shape they
/// are evaluated for.
struct TheoryParams {
  double L = 0.0;      // smoothness
  double mu = 0.0;     // strong convexity
  double G = 0.0;      // stochastic-gradient norm bound
  double sigma = 0.0;  // stochastic-gradient standard-deviation bound
  int tau = 1;         // local steps per round
  int m = 1;           // selected clients per round

  void validate() const;
};

}  // namespace fedsel
