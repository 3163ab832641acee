#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vasso {

/// Dense 64-bit parameter vector. Model parameters, gradients, slopes and
/// perturbations all live here.
using ParamVector = std::vector<double>;

/// Norm threshold below which a slope direction is considered undefined.
inline constexpr double kZeroSlopeTol = 1e-12;

struct DimensionMismatch : std::invalid_argument {
  DimensionMismatch(std::size_t a, std::size_t b)
      : std::invalid_argument("dimension mismatch: " + std::to_string(a) +
                              " vs " + std::to_string(b)) {}
};

/// Thrown when a direction-dependent operation receives a vector with norm
/// below kZeroSlopeTol.
struct ZeroSlopeError : std::runtime_error {
  ZeroSlopeError() : std::runtime_error("slope norm below zero threshold") {}
};

inline double dot(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;  // empty vectors: vacuous sum = 0
}

inline double norm(const ParamVector& a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(const ParamVector& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// Rescales v onto the sphere of radius rho. Direction must be well defined.
inline ParamVector scale_to_sphere(const ParamVector& v, double rho) {
  const double n = norm(v);
  if (n <= kZeroSlopeTol) throw ZeroSlopeError();
  ParamVector out(v);
  const double s = rho / n;
  for (double& x : out) x *= s;
  return out;
}

// y += alpha * x
inline void axpy(double alpha, const ParamVector& x, ParamVector& y) {
  if (x.size() != y.size()) throw DimensionMismatch(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline ParamVector add(const ParamVector& a, const ParamVector& b) {
  ParamVector out(a);
  axpy(1.0, b, out);
  return out;
}

inline ParamVector sub(const ParamVector& a, const ParamVector& b) {
  ParamVector out(a);
  axpy(-1.0, b, out);
  return out;
}

inline ParamVector scaled(const ParamVector& a, double s) {
  ParamVector out(a);
  for (double& x : out) x *= s;
  return out;
}

inline double sq_dist(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace vasso
