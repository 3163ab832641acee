#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "vasso/csv.hpp"
#include "vasso/problem.hpp"
#include "vasso/rng.hpp"
#include "vasso/vec.hpp"

namespace vasso {

// ---------------------------------------------------------------------------
// Dense symmetric matrix helpers (small dims only)

class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t n) : n_(n), a_(n * n, 0.0) {}

  static SymMatrix diag(const std::vector<double>& d) {
    SymMatrix m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  /// Q diag(eigs) Q^T with Q a random orthogonal matrix built from two
  /// Householder reflections drawn from the stream.
  static SymMatrix random_with_spectrum(const std::vector<double>& eigs,
                                        RandomStream& stream) {
    const std::size_t n = eigs.size();
    SymMatrix m = diag(eigs);
    for (int rep = 0; rep < 2; ++rep) {
      ParamVector v = gaussian_vector(n, 1.0, stream);
      const double vn = norm(v);
      for (double& x : v) x /= vn;
      m = m.householder_conjugate(v);
    }
    return m;
  }

  std::size_t dim() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return a_[i * n_ + j];
  }

  ParamVector apply(const ParamVector& x) const {
    if (x.size() != n_) throw DimensionMismatch(x.size(), n_);
    ParamVector y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n_; ++j) s += a_[i * n_ + j] * x[j];
      y[i] = s;
    }
    return y;
  }

  // H A H with H = I - 2 v v^T, ||v|| = 1
  SymMatrix householder_conjugate(const ParamVector& v) const {
    SymMatrix h(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        h(i, j) = (i == j ? 1.0 : 0.0) - 2.0 * v[i] * v[j];
    // out = h * a_ * h
    SymMatrix tmp(n_), out(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n_; ++k) s += h(i, k) * (*this)(k, j);
        tmp(i, j) = s;
      }
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n_; ++k) s += tmp(i, k) * h(k, j);
        out(i, j) = s;
      }
    return out;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> a_;
};

/// Exact gradient of 0.5 x^T A x.
inline ParamVector quadratic_full_grad(const SymMatrix& a,
                                       const ParamVector& x) {
  return a.apply(x);
}

// ---------------------------------------------------------------------------
// NoisyQuadratic: f(x) = 0.5 x^T A x with additive Gaussian gradient noise.
// sigma is the total noise level, E||zeta||^2 = sigma^2, so per-coordinate
// noise is sigma/sqrt(dim).

class NoisyQuadratic : public StochasticProblem {
 public:
  NoisyQuadratic(SymMatrix a, double sigma, double smoothness_L)
      : a_(std::move(a)), sigma_(sigma), smoothness_(smoothness_L) {}

  std::size_t dim() const override { return a_.dim(); }

  double value(const ParamVector& x, RandomStream&) const override {
    return full_value(x);
  }

  ParamVector grad(const ParamVector& x, RandomStream& stream) const override {
    return grad_with_batch_fraction(x, stream, 1.0);
  }

  // Halving the batch doubles the noise variance.
  ParamVector grad_with_batch_fraction(const ParamVector& x,
                                       RandomStream& stream,
                                       double fraction) const override {
    ParamVector g = a_.apply(x);
    const double per_coord =
        sigma_ / std::sqrt(static_cast<double>(dim()) * fraction);
    if (sigma_ > 0.0)
      axpy(1.0, gaussian_vector(dim(), per_coord, stream), g);
    return g;
  }

  bool has_full_grad() const override { return true; }
  ParamVector full_grad(const ParamVector& x) const override {
    return a_.apply(x);
  }
  double full_value(const ParamVector& x) const override {
    return 0.5 * dot(x, a_.apply(x));
  }
  ProblemMeta meta() const override { return {sigma_, smoothness_, 0.0}; }

  const SymMatrix& matrix() const { return a_; }

 private:
  SymMatrix a_;
  double sigma_;
  double smoothness_;
};

// ---------------------------------------------------------------------------
// DoubleWell: scalar landscape with two equal-depth minima of unequal
// curvature. Quadratic bowls 0.5*a_sharp*(x+s)^2 on x <= -s/2 and
// 0.5*a_flat*(x-s)^2 on x >= s/2, bridged by the cubic Hermite interpolant of
// the boundary values and derivatives on [-s/2, s/2] (C^1 everywhere; both
// minima sit strictly inside their quadratic pieces).

class DoubleWell : public StochasticProblem {
 public:
  DoubleWell(double a_sharp, double a_flat, double separation, double sigma)
      : a_sharp_(a_sharp),
        a_flat_(a_flat),
        s_(separation),
        sigma_(sigma) {
    if (!(a_flat > 0.0 && a_sharp > a_flat))
      throw std::invalid_argument("double well requires a_sharp > a_flat > 0");
  }

  double sharp_minimum() const { return -s_; }
  double flat_minimum() const { return s_; }

  double f(double x) const {
    if (x <= -0.5 * s_) return 0.5 * a_sharp_ * (x + s_) * (x + s_);
    if (x >= 0.5 * s_) return 0.5 * a_flat_ * (x - s_) * (x - s_);
    return hermite(x).first;
  }

  double df(double x) const {
    if (x <= -0.5 * s_) return a_sharp_ * (x + s_);
    if (x >= 0.5 * s_) return a_flat_ * (x - s_);
    return hermite(x).second;
  }

  std::size_t dim() const override { return 1; }
  double value(const ParamVector& x, RandomStream&) const override {
    return f(x.at(0));
  }
  ParamVector grad(const ParamVector& x, RandomStream& stream) const override {
    double g = df(x.at(0));
    if (sigma_ > 0.0) g += sigma_ * stream.normal();
    return {g};
  }
  bool has_full_grad() const override { return true; }
  ParamVector full_grad(const ParamVector& x) const override {
    return {df(x.at(0))};
  }
  double full_value(const ParamVector& x) const override { return f(x.at(0)); }
  ProblemMeta meta() const override { return {sigma_, a_sharp_, 0.0}; }

 private:
  // value and derivative of the bridge cubic at x in [-s/2, s/2]
  std::pair<double, double> hermite(double x) const {
    const double h = s_;  // interval length
    const double p0 = 0.125 * a_sharp_ * s_ * s_;
    const double m0 = 0.5 * a_sharp_ * s_;
    const double p1 = 0.125 * a_flat_ * s_ * s_;
    const double m1 = -0.5 * a_flat_ * s_;
    const double u = (x + 0.5 * s_) / h;  // in [0, 1]
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    const double val = h00 * p0 + h10 * h * m0 + h01 * p1 + h11 * h * m1;
    const double d00 = 6 * u * (u - 1);
    const double d10 = (1 - u) * (1 - 3 * u);
    const double d01 = 6 * u * (1 - u);
    const double d11 = u * (3 * u - 2);
    const double der =
        (d00 * p0 + d01 * p1) / h + d10 * m0 + d11 * m1;
    return {val, der};
  }

  double a_sharp_, a_flat_, s_, sigma_;
};

// ---------------------------------------------------------------------------
// FixedGradientOracle: the gradient field is constant, with per-coordinate
// Gaussian noise. Used for adversary-cloud studies.

class FixedGradientOracle : public StochasticProblem {
 public:
  FixedGradientOracle(ParamVector g_true, ParamVector noise_scales)
      : g_true_(std::move(g_true)), scales_(std::move(noise_scales)) {
    if (g_true_.size() != scales_.size())
      throw DimensionMismatch(g_true_.size(), scales_.size());
  }

  static FixedGradientOracle with_snr(ParamVector g_true, double snr) {
    // Isotropic noise sized so ||g|| / sqrt(E||zeta||^2) equals snr.
    const double g_norm = norm(g_true);
    const double per_coord =
        g_norm / (snr * std::sqrt(static_cast<double>(g_true.size())));
    ParamVector scales(g_true.size(), per_coord);
    return FixedGradientOracle(std::move(g_true), std::move(scales));
  }

  std::size_t dim() const override { return g_true_.size(); }
  double value(const ParamVector& x, RandomStream&) const override {
    return dot(g_true_, x);
  }
  ParamVector grad(const ParamVector&, RandomStream& stream) const override {
    ParamVector g(g_true_);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (scales_[i] > 0.0) g[i] += scales_[i] * stream.normal();
    return g;
  }
  bool has_full_grad() const override { return true; }
  ParamVector full_grad(const ParamVector&) const override { return g_true_; }
  double full_value(const ParamVector& x) const override {
    return dot(g_true_, x);
  }
  ProblemMeta meta() const override {
    double s2 = 0.0;
    for (double s : scales_) s2 += s * s;
    return {std::sqrt(s2), {}, {}};
  }

 private:
  ParamVector g_true_;
  ParamVector scales_;
};

// ---------------------------------------------------------------------------
// Two-moons dataset with exact label-flip counts.

struct Dataset {
  std::vector<std::array<double, 2>> points;
  std::vector<int> labels;       // 0 or 1
  std::vector<std::uint8_t> flipped;

  std::size_t size() const { return points.size(); }
};

/// Two interleaving half circles with additive Gaussian jitter. Outer moon
/// (label 0): (cos t, sin t); inner moon (label 1): (1 - cos t, 0.5 - sin t),
/// t uniform on [0, pi]. Classes alternate so counts are exactly balanced.
inline Dataset make_two_moons(std::size_t n, double noise,
                              RandomStream& stream) {
  Dataset ds;
  ds.points.resize(n);
  ds.labels.resize(n);
  ds.flipped.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = stream.uniform() * std::numbers::pi;
    double x1, x2;
    if (label == 0) {
      x1 = std::cos(t);
      x2 = std::sin(t);
    } else {
      x1 = 1.0 - std::cos(t);
      x2 = 0.5 - std::sin(t);
    }
    if (noise > 0.0) {
      x1 += noise * stream.normal();
      x2 += noise * stream.normal();
    }
    ds.points[i] = {x1, x2};
    ds.labels[i] = label;
  }
  return ds;
}

/// Flips exactly floor(fraction * n) labels, chosen without replacement via a
/// partial Fisher-Yates shuffle of the index set.
inline Dataset flip_labels(Dataset ds, double fraction, RandomStream& stream) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("flip fraction must be in [0, 1)");
  const std::size_t n = ds.size();
  const std::size_t k =
      static_cast<std::size_t>(fraction * static_cast<double>(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + stream.below(n - i);
    std::swap(idx[i], idx[j]);
    ds.labels[idx[i]] = 1 - ds.labels[idx[i]];
    ds.flipped[idx[i]] ^= 1;
  }
  return ds;
}

inline void save_dataset_csv(std::ostream& out, const Dataset& ds) {
  out << "x1,x2,label,flipped\n";
  for (std::size_t i = 0; i < ds.size(); ++i)
    out << format_real(ds.points[i][0]) << ',' << format_real(ds.points[i][1])
        << ',' << ds.labels[i] << ',' << int(ds.flipped[i]) << '\n';
}

inline Dataset load_dataset_csv(std::istream& in) {
  Dataset ds;
  std::string line;
  if (!std::getline(in, line) || line != "x1,x2,label,flipped")
    throw std::runtime_error("dataset csv: bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::array<double, 2> p{};
    std::getline(row, cell, ',');
    p[0] = std::stod(cell);
    std::getline(row, cell, ',');
    p[1] = std::stod(cell);
    std::getline(row, cell, ',');
    const int label = std::stoi(cell);
    std::getline(row, cell, ',');
    const int flip = std::stoi(cell);
    ds.points.push_back(p);
    ds.labels.push_back(label);
    ds.flipped.push_back(static_cast<std::uint8_t>(flip));
  }
  return ds;
}

}  // namespace vasso
