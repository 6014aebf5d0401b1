#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace fedsel {

// Model parameters are plain dense vectors; dimension is fixed per task.
using ParamVector = std::vector<double>;

namespace vec {

inline ParamVector zeros(std::size_t n) { return ParamVector(n, 0.0); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, ParamVector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(ParamVector& x, double alpha) {
  for (double& v : x) v *= alpha;
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace vec
}  // namespace fedsel
