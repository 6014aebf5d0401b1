#include "fedsel/task.hpp"

#include <cmath>
#include <limits>

namespace fedsel {

void DataFractions::validate() const {
  if (p.empty()) throw std::invalid_argument("data fractions: empty");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("data fractions: entries must be finite and nonnegative");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("data fractions: must sum to 1 within 1e-9");
  }
}

DataFractions DataFractions::normalized(std::vector<double> raw) {
  double sum = 0.0;
  for (double v : raw) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("data fractions: raw weights must be finite and nonnegative");
    }
    sum += v;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("data fractions: weight sum must be positive");
  for (double& v : raw) v /= sum;
  DataFractions out{std::move(raw)};
  out.validate();
  return out;
}

double Task::eval_metric(const ParamVector&) const {
  return std::numeric_limits<double>::quiet_NaN();
}

double global_loss(const Task& task, const ParamVector& w) {
  const DataFractions& p = task.fractions();
  double total = 0.0;
  for (int k = 0; k < task.client_count(); ++k) {
    total += p[k] * task.loss(k, w);
  }
  return total;
}

void TheoryParams::validate() const {
  if (!(mu > 0.0)) throw std::invalid_argument("theory params: mu must be positive");
  if (!(L >= mu)) throw std::invalid_argument("theory params: L must be >= mu");
  if (!(G >= 0.0)) throw std::invalid_argument("theory params: G must be nonnegative");
  if (!(sigma >= 0.0)) throw std::invalid_argument("theory params: sigma must be nonnegative");
  if (tau < 1) throw std::invalid_argument("theory params: tau must be >= 1");
  if (m < 1) throw std::invalid_argument("theory params: m must be >= 1");
}

}  // namespace fedsel
