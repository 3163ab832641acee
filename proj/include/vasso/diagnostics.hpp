#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "vasso/optim.hpp"
#include "vasso/problem.hpp"
#include "vasso/rng.hpp"
#include "vasso/vec.hpp"

namespace vasso {

/// Mean of ||slope_t - grad f(x_t)||^2 over a recorded sequence.
inline double slope_mse(const std::vector<ParamVector>& slopes,
                        const std::vector<ParamVector>& full_grads) {
  if (slopes.size() != full_grads.size() || slopes.empty())
    throw std::invalid_argument("slope_mse: sequences must have equal length >= 1");
  double acc = 0.0;
  for (std::size_t i = 0; i < slopes.size(); ++i)
    acc += sq_dist(slopes[i], full_grads[i]);
  return acc / static_cast<double>(slopes.size());
}

/// Burn-in length making the EMA transient negligible: (1-theta)^B < e^-10.
inline std::size_t ema_burn_in(double theta) {
  return static_cast<std::size_t>(std::ceil(10.0 / theta));
}

/// EMA of `burn_in` fresh gradient draws at frozen x, warm-started at the
/// first draw.
inline ParamVector burned_in_ema_slope(const StochasticProblem& problem,
                                       const ParamVector& x, double theta,
                                       std::size_t burn_in,
                                       RandomStream& stream) {
  ParamVector d = problem.grad(x, stream);
  for (std::size_t k = 1; k < burn_in; ++k) {
    const ParamVector g = problem.grad(x, stream);
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = (1.0 - theta) * d[i] + theta * g[i];
  }
  return d;
}

/// One independent slope draw at frozen x, per the rule's recipe.
inline ParamVector frozen_slope(const AdversaryRule& rule,
                                const StochasticProblem& problem,
                                const ParamVector& x, RandomStream& stream) {
  switch (rule.tag) {
    case RuleTag::SGD:
    case RuleTag::SAM:
      return problem.grad(x, stream);
    case RuleTag::VaSSO:
      return burned_in_ema_slope(problem, x, rule.theta,
                                 ema_burn_in(rule.theta), stream);
    case RuleTag::SAMdb:
      return problem.grad_with_batch_fraction(x, stream,
                                              rule.aux_batch_fraction);
    case RuleTag::NoisySAM: {
      ParamVector g = problem.grad(x, stream);
      if (rule.zeta_sigma > 0.0)
        axpy(1.0, gaussian_vector(g.size(), rule.zeta_sigma, stream), g);
      return g;
    }
    case RuleTag::FullGradSAM:
      return problem.full_grad(x);
  }
  throw std::logic_error("unreachable");
}

struct StabilityReport {
  RuleTag tag = RuleTag::SAM;
  double rho = 0.0;
  std::size_t samples = 0;
  double delta_hat = 0.0;  // Monte Carlo mean of the linearization quality gap
  double stderr_ = 0.0;
};

/// Monte Carlo estimate of the expected quality gap between the rule's slope
/// and the full-gradient slope at frozen x. Uses the closed form of the
/// maximized linearization over the ball: the gap per sample is exactly
/// rho * | ||v|| - ||grad f(x)|| |.
inline StabilityReport delta_stability(const AdversaryRule& rule,
                                       const StochasticProblem& problem,
                                       const ParamVector& x, double rho,
                                       std::size_t n_samples,
                                       RandomStream& stream) {
  if (n_samples < 2)
    throw std::invalid_argument("delta_stability needs n_samples >= 2");
  const double g_norm = norm(problem.full_grad(x));
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    RandomStream cs = stream.child(i);
    const double gap = rho * std::abs(norm(frozen_slope(rule, problem, x, cs)) - g_norm);
    sum += gap;
    sum_sq += gap * gap;
  }
  const double n = static_cast<double>(n_samples);
  StabilityReport rep;
  rep.tag = rule.tag;
  rep.rho = rho;
  rep.samples = n_samples;
  rep.delta_hat = sum / n;
  const double var = std::max(0.0, sum_sq / n - rep.delta_hat * rep.delta_hat);
  rep.stderr_ = std::sqrt(var / n);
  return rep;
}

struct CloudStats {
  std::vector<ParamVector> directions;  // unit vectors
  double mean_resultant_length = 0.0;
  double mean_cosine_to_true = 0.0;
};

/// Draws n independent adversaries from noisy gradients of a fixed true
/// gradient and reports how concentrated their directions are.
inline CloudStats adversary_cloud(const StochasticProblem& oracle,
                                  const ParamVector& g_true, double rho,
                                  std::size_t n, const AdversaryRule& rule,
                                  RandomStream& stream) {
  if (n < 1) throw std::invalid_argument("adversary_cloud needs n >= 1");
  const ParamVector x(g_true.size(), 0.0);
  CloudStats stats;
  stats.directions.reserve(n);
  ParamVector mean_dir(g_true.size(), 0.0);
  const ParamVector u_true = scale_to_sphere(g_true, 1.0);
  double cos_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream cs = stream.child(i);
    const ParamVector v = frozen_slope(rule, oracle, x, cs);
    bool fallback = false;
    const ParamVector eps = adversary(v, rho, &fallback);
    if (fallback) continue;  // undefined direction contributes nothing
    const ParamVector dir = scale_to_sphere(eps, 1.0);
    axpy(1.0, dir, mean_dir);
    cos_sum += dot(dir, u_true);
    stats.directions.push_back(dir);
  }
  const double m = static_cast<double>(stats.directions.size());
  if (m > 0) {
    stats.mean_resultant_length = norm(mean_dir) / m;
    stats.mean_cosine_to_true = cos_sum / m;
  }
  return stats;
}

/// ||grad f(x)|| over the RMS gradient-noise norm. When the problem carries no
/// exact full gradient, the mean of 10^4 draws stands in and its error is part
/// of the Monte Carlo spread. Zero noise maps to +infinity.
inline double snr_estimate(const StochasticProblem& problem,
                           const ParamVector& x, std::size_t n_samples,
                           RandomStream& stream) {
  ParamVector g_star;
  if (problem.has_full_grad()) {
    g_star = problem.full_grad(x);
  } else {
    const std::size_t m = 10000;
    g_star.assign(problem.dim(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      RandomStream cs = stream.child(1000000 + i);
      axpy(1.0 / static_cast<double>(m), problem.grad(x, cs), g_star);
    }
  }
  double noise_ms = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    RandomStream cs = stream.child(i);
    noise_ms += sq_dist(problem.grad(x, cs), g_star);
  }
  noise_ms /= static_cast<double>(n_samples);
  if (noise_ms == 0.0) return std::numeric_limits<double>::infinity();
  return norm(g_star) / std::sqrt(noise_ms);
}

inline double default_hvp_step(const ParamVector& x) {
  return 1e-3 * std::max(1.0, norm(x));
}

/// Hessian-vector product by central differences of the exact full gradient.
inline ParamVector hvp(const StochasticProblem& problem, const ParamVector& x,
                       const ParamVector& v, double r) {
  if (r <= 0.0) throw std::invalid_argument("hvp step must be positive");
  ParamVector xp(x), xm(x);
  axpy(r, v, xp);
  axpy(-r, v, xm);
  ParamVector h = sub(problem.full_grad(xp), problem.full_grad(xm));
  for (double& e : h) e /= 2.0 * r;
  return h;
}

struct SpectrumReport {
  std::vector<double> eigenvalues;  // descending
  double lambda1 = 0.0;
  std::optional<double> ratio_1_5;
};

namespace detail {

/// Eigenvalues of a symmetric tridiagonal matrix (diag d, off-diag e) by the
/// implicit QL method. e has the same length as d; e[0] is unused.
inline std::vector<double> tridiag_eigenvalues(std::vector<double> d,
                                               std::vector<double> e) {
  const std::size_t n = d.size();
  if (n == 0) return {};
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd)
          break;
      }
      if (m != l) {
        if (++iter == 50)
          throw std::runtime_error("tridiagonal QL failed to converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
  return d;
}

}  // namespace detail

using LinearOperator = std::function<ParamVector(const ParamVector&)>;

/// Lanczos with full reorthogonalization from a random unit start. Returns
/// the top-k Ritz values of the tridiagonalization, descending. A breakdown
/// (beta < 1e-12) terminates early with the Ritz values converged so far.
inline SpectrumReport lanczos_topk(const LinearOperator& op, std::size_t dim,
                                   std::size_t k, std::size_t iters,
                                   RandomStream& stream) {
  if (k < 1 || k > iters || iters > dim)
    throw std::invalid_argument("lanczos requires 1 <= k <= iters <= dim");
  std::vector<ParamVector> basis;
  std::vector<double> alpha, beta;  // beta[j]: off-diagonal after step j

  ParamVector q = gaussian_vector(dim, 1.0, stream);
  q = scale_to_sphere(q, 1.0);
  basis.push_back(q);

  for (std::size_t j = 0; j < iters; ++j) {
    ParamVector w = op(basis[j]);
    const double a = dot(w, basis[j]);
    alpha.push_back(a);
    axpy(-a, basis[j], w);
    if (j > 0) axpy(-beta[j - 1], basis[j - 1], w);
    // full reorthogonalization, two passes
    for (int pass = 0; pass < 2; ++pass)
      for (const ParamVector& b : basis) axpy(-dot(w, b), b, w);
    const double bnorm = norm(w);
    if (j + 1 == iters) break;
    if (bnorm < 1e-12) break;
    beta.push_back(bnorm);
    for (double& e : w) e /= bnorm;
    basis.push_back(std::move(w));
  }

  std::vector<double> off(alpha.size(), 0.0);
  for (std::size_t j = 1; j < alpha.size(); ++j) off[j] = beta[j - 1];
  std::vector<double> ritz = detail::tridiag_eigenvalues(alpha, off);
  std::sort(ritz.begin(), ritz.end(), std::greater<double>());
  if (ritz.size() > k) ritz.resize(k);

  SpectrumReport rep;
  rep.eigenvalues = ritz;
  rep.lambda1 = ritz.empty() ? 0.0 : ritz.front();
  if (k >= 5 && ritz.size() >= 5 && ritz[4] > 1e-8)
    rep.ratio_1_5 = rep.lambda1 / ritz[4];
  return rep;
}

}  // namespace vasso
