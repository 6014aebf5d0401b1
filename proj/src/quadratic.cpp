#include "fedsel/quadratic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsel {
namespace {

void check_dimension(int expected, const ParamVector& w) {
  if (static_cast<int>(w.size()) != expected) {
    throw std::invalid_argument("quadratic task: parameter dimension " +
                                std::to_string(w.size()) + " != " + std::to_string(expected));
  }
}

}  // namespace

QuadraticTask::QuadraticTask(std::vector<double> curvatures, std::vector<ParamVector> linear_terms,
                             DataFractions fractions)
    : curvatures_(std::move(curvatures)),
      linear_terms_(std::move(linear_terms)),
      p_(std::move(fractions)) {
  if (curvatures_.empty() || curvatures_.size() != linear_terms_.size() ||
      p_.p.size() != curvatures_.size()) {
    throw std::invalid_argument("quadratic task: inconsistent client counts");
  }
  p_.validate();
  dim_ = static_cast<int>(linear_terms_.front().size());
  if (dim_ < 1) throw std::invalid_argument("quadratic task: dimension must be >= 1");
  for (const ParamVector& e : linear_terms_) {
    if (static_cast<int>(e.size()) != dim_) {
      throw std::invalid_argument("quadratic task: linear terms must share one dimension");
    }
  }
  for (double h : curvatures_) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw std::invalid_argument("quadratic task: curvatures must be positive finite");
    }
  }
}

double QuadraticTask::loss(int k, const ParamVector& w) const {
  check_dimension(dim_, w);
  // 1/2 h ||w - e/h||^2: same value as the expanded form, but nonnegative by
  // construction and exactly zero at the local optimum.
  const double h = curvatures_[static_cast<std::size_t>(k)];
  const ParamVector& e = linear_terms_[static_cast<std::size_t>(k)];
  double sq = 0.0;
  for (int i = 0; i < dim_; ++i) {
    const double d = w[static_cast<std::size_t>(i)] - e[static_cast<std::size_t>(i)] / h;
    sq += d * d;
  }
  return 0.5 * h * sq;
}

ParamVector QuadraticTask::gradient(int k, const ParamVector& w) const {
  check_dimension(dim_, w);
  const double h = curvatures_[static_cast<std::size_t>(k)];
  const ParamVector& e = linear_terms_[static_cast<std::size_t>(k)];
  ParamVector g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) g[i] = h * w[i] - e[i];
  return g;
}

double QuadraticTask::estimate_loss(int k, const ParamVector& w, std::size_t, Rng&) const {
  return loss(k, w);
}

StochasticGradientResult QuadraticTask::stochastic_gradient(int k, const ParamVector& w,
                                                            std::size_t, Rng&) const {
  return {gradient(k, w), loss(k, w)};
}

ParamVector QuadraticTask::local_optimum(int k) const {
  const double h = curvatures_[static_cast<std::size_t>(k)];
  ParamVector w = linear_terms_[static_cast<std::size_t>(k)];
  for (double& v : w) v /= h;
  return w;
}

std::vector<double> sample_power_law(int count, double a, Rng& rng) {
  if (count < 1) throw std::invalid_argument("power law: count must be >= 1");
  if (!(a > 0.0)) throw std::invalid_argument("power law: exponent must be positive");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (double& v : out) {
    // Inverse CDF of a x^(a-1) on (0,1]; 1-u keeps the draw in (0,1].
    v = std::pow(1.0 - unit(rng), 1.0 / a);
  }
  return out;
}

QuadraticTask generate_quadratic(int clients, int dim, double power_law_a, std::uint64_t seed) {
  if (clients < 1) throw std::invalid_argument("generate_quadratic: clients must be >= 1");
  if (dim < 1) throw std::invalid_argument("generate_quadratic: dimension must be >= 1");
  if (!(power_law_a > 0.0)) {
    throw std::invalid_argument("generate_quadratic: power_law_a must be positive");
  }

  Rng curvature_rng = make_stream(seed, {1});
  Rng linear_rng = make_stream(seed, {2});
  Rng fraction_rng = make_stream(seed, {3});

  std::uniform_real_distribution<double> curvature_dist(1.0, 20.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> curvatures(static_cast<std::size_t>(clients));
  for (double& h : curvatures) h = curvature_dist(curvature_rng);

  std::vector<ParamVector> linear_terms(static_cast<std::size_t>(clients));
  for (int k = 0; k < clients; ++k) {
    ParamVector e(static_cast<std::size_t>(dim));
    for (double& v : e) v = curvatures[static_cast<std::size_t>(k)] * unit(linear_rng);
    linear_terms[static_cast<std::size_t>(k)] = std::move(e);
  }

  DataFractions p = DataFractions::normalized(sample_power_law(clients, power_law_a, fraction_rng));
  return QuadraticTask(std::move(curvatures), std::move(linear_terms), std::move(p));
}

TaskOptima quadratic_optima(const QuadraticTask& task) {
  const int K = task.client_count();
  const int v = task.dimension();
  const DataFractions& p = task.fractions();

  TaskOptima out;
  out.local_opts.reserve(static_cast<std::size_t>(K));
  out.local_values.assign(static_cast<std::size_t>(K), 0.0);

  double weighted_curvature = 0.0;
  ParamVector weighted_linear = vec::zeros(static_cast<std::size_t>(v));
  for (int k = 0; k < K; ++k) {
    out.local_opts.push_back(task.local_optimum(k));
    weighted_curvature += p[k] * task.curvature(k);
    vec::axpy(p[k], task.linear_term(k), weighted_linear);
  }

  out.global_opt = std::move(weighted_linear);
  for (double& x : out.global_opt) x /= weighted_curvature;
  out.global_value = global_loss(task, out.global_opt);
  return out;
}

}  // namespace fedsel
