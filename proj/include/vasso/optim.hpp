#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vasso/problem.hpp"
#include "vasso/rng.hpp"
#include "vasso/vec.hpp"

namespace vasso {

enum class RuleTag { SGD, SAM, VaSSO, SAMdb, NoisySAM, FullGradSAM };

inline const char* rule_name(RuleTag tag) {
  switch (tag) {
    case RuleTag::SGD: return "sgd";
    case RuleTag::SAM: return "sam";
    case RuleTag::VaSSO: return "vasso";
    case RuleTag::SAMdb: return "samdb";
    case RuleTag::NoisySAM: return "noisysam";
    case RuleTag::FullGradSAM: return "fullgradsam";
  }
  return "?";
}

/// Selects the slope of the stochastic linearization used to build the
/// adversary.
struct AdversaryRule {
  RuleTag tag = RuleTag::SAM;
  double theta = 1.0;        // VaSSO only, in (0, 1]
  double zeta_sigma = 0.0;   // NoisySAM only
  double aux_batch_fraction = 1.0;  // SAMdb only; 0.5 gives the half-batch variant

  void validate() const {
    if (tag == RuleTag::VaSSO && (theta <= 0.0 || theta > 1.0))
      throw std::invalid_argument("vasso requires theta in (0, 1]");
    if (tag == RuleTag::NoisySAM && zeta_sigma < 0.0)
      throw std::invalid_argument("noisysam requires zeta_sigma >= 0");
    if (tag == RuleTag::SAMdb && aux_batch_fraction <= 0.0)
      throw std::invalid_argument("samdb requires aux_batch_fraction > 0");
  }
};

inline AdversaryRule sam_rule() { return {RuleTag::SAM}; }
inline AdversaryRule sgd_rule() { return {RuleTag::SGD}; }
inline AdversaryRule vasso_rule(double theta) {
  return {RuleTag::VaSSO, theta};
}

enum class ScheduleMode { Constant, InverseSqrtT };

/// Step size / radius schedule. InverseSqrtT uses eta0/sqrt(T) and
/// rho0/sqrt(T), constant across t.
struct Schedule {
  double eta0 = 0.1;
  double rho0 = 0.0;
  ScheduleMode mode = ScheduleMode::Constant;
  std::size_t T = 0;

  double eta() const {
    return mode == ScheduleMode::Constant
               ? eta0
               : eta0 / std::sqrt(static_cast<double>(T > 0 ? T : 1));
  }
  double rho() const {
    return mode == ScheduleMode::Constant
               ? rho0
               : rho0 / std::sqrt(static_cast<double>(T > 0 ? T : 1));
  }
};

struct OptimizerState {
  ParamVector x;
  ParamVector d;              // VaSSO slope; valid once d_valid
  std::size_t t = 0;
  double d_norm_cache = 0.0;  // == norm(d) whenever d_valid
  bool d_valid = false;

  explicit OptimizerState(ParamVector x0)
      : x(std::move(x0)), d(x.size(), 0.0) {}
};

struct StepReport {
  ParamVector epsilon;
  ParamVector slope;
  ParamVector g_at_adversary;
  double loss_before = 0.0;
  std::optional<double> grad_norm_sq_full;
  std::optional<double> grad_norm_sq_full_at_adversary;
  std::optional<double> slope_mse_sample;  // ||slope - grad f(x)||^2
  bool fallback_used = false;
};

struct DivergedError : std::runtime_error {
  std::size_t iteration;
  explicit DivergedError(std::size_t t)
      : std::runtime_error("diverged at iteration " + std::to_string(t)),
        iteration(t) {}
};

inline constexpr double kDivergenceLossBound = 1e12;

/// Slope of the stochastic linearization for one step. Consumes batch_stream
/// (the caller keeps a copy so the adversary-point gradient reuses the same
/// minibatch) and, for SAMdb/NoisySAM, aux_stream. Updates state.d for VaSSO.
inline ParamVector compute_slope(const AdversaryRule& rule,
                                 OptimizerState& state,
                                 const StochasticProblem& problem,
                                 RandomStream& batch_stream,
                                 RandomStream& aux_stream) {
  switch (rule.tag) {
    case RuleTag::SGD:
    case RuleTag::SAM:
      return problem.grad(state.x, batch_stream);
    case RuleTag::VaSSO: {
      const ParamVector g = problem.grad(state.x, batch_stream);
      if (!state.d_valid) {
        state.d = g;  // EMA warm-starts at the first draw
        state.d_valid = true;
      } else {
        for (std::size_t i = 0; i < g.size(); ++i)
          state.d[i] = (1.0 - rule.theta) * state.d[i] + rule.theta * g[i];
      }
      state.d_norm_cache = norm(state.d);
      return state.d;
    }
    case RuleTag::SAMdb:
      return problem.grad_with_batch_fraction(state.x, aux_stream,
                                              rule.aux_batch_fraction);
    case RuleTag::NoisySAM: {
      ParamVector g = problem.grad(state.x, batch_stream);
      if (rule.zeta_sigma > 0.0)
        axpy(1.0, gaussian_vector(g.size(), rule.zeta_sigma, aux_stream), g);
      return g;
    }
    case RuleTag::FullGradSAM:
      return problem.full_grad(state.x);
  }
  throw std::logic_error("unreachable");
}

/// Closed-form adversary rho * v / ||v||. rho = 0 or a degenerate slope
/// yields the zero perturbation; the latter sets *fallback_used.
inline ParamVector adversary(const ParamVector& v, double rho,
                             bool* fallback_used = nullptr) {
  if (fallback_used) *fallback_used = false;
  if (rho == 0.0) return ParamVector(v.size(), 0.0);
  if (norm(v) <= kZeroSlopeTol) {
    if (fallback_used) *fallback_used = true;
    return ParamVector(v.size(), 0.0);  // degrade to SGD for this step
  }
  return scale_to_sphere(v, rho);
}

/// Linear maximization oracle over the l2 ball of radius rho: identical
/// formula to the adversary, but surfaces ZeroSlope instead of falling back.
inline ParamVector lmo_ball(const ParamVector& g, double rho) {
  return scale_to_sphere(g, rho);
}

/// Per-run stream layout: step t draws its minibatch from child(2t) and any
/// auxiliary randomness (independent batch, injected noise) from child(2t+1),
/// so the main batch sequence is identical across rules.
struct RunStreams {
  RandomStream root;
  explicit RunStreams(std::uint64_t seed) : root(seed) {}
  RandomStream batch(std::size_t t) const { return root.child(2 * t); }
  RandomStream aux(std::size_t t) const { return root.child(2 * t + 1); }
};

/// One iteration: build the slope, perturb, and descend along the gradient at
/// the perturbed point. Both gradient evaluations reuse the same minibatch.
inline StepReport step(const AdversaryRule& rule, OptimizerState& state,
                       const StochasticProblem& problem,
                       const Schedule& schedule, const RunStreams& streams) {
  rule.validate();
  const double rho = rule.tag == RuleTag::SGD ? 0.0 : schedule.rho();
  if (rule.tag == RuleTag::SGD && schedule.rho() != 0.0)
    throw std::invalid_argument("sgd rule forbids rho > 0");

  const std::size_t t = state.t;
  RandomStream batch_for_loss = streams.batch(t);
  RandomStream batch_for_slope = streams.batch(t);
  RandomStream batch_for_update = streams.batch(t);
  RandomStream aux = streams.aux(t);

  StepReport report;
  report.loss_before = problem.value(state.x, batch_for_loss);
  report.slope = compute_slope(rule, state, problem, batch_for_slope, aux);
  report.epsilon = adversary(report.slope, rho, &report.fallback_used);

  const ParamVector x_adv = add(state.x, report.epsilon);
  report.g_at_adversary = problem.grad(x_adv, batch_for_update);

  if (!std::isfinite(report.loss_before) ||
      std::abs(report.loss_before) > kDivergenceLossBound ||
      !all_finite(report.g_at_adversary))
    throw DivergedError(t);

  if (problem.has_full_grad()) {
    const ParamVector gf = problem.full_grad(state.x);
    report.grad_norm_sq_full = dot(gf, gf);
    const ParamVector gfa = problem.full_grad(x_adv);
    report.grad_norm_sq_full_at_adversary = dot(gfa, gfa);
    report.slope_mse_sample = sq_dist(report.slope, gf);
  }

  axpy(-schedule.eta(), report.g_at_adversary, state.x);
  state.t = t + 1;
  return report;
}

/// One recorded iteration of a run.
struct RunRecord {
  std::size_t t = 0;
  double loss = 0.0;
  std::optional<double> grad_norm_sq;
  std::optional<double> grad_norm_sq_at_adversary;
  double eps_norm = 0.0;
  std::optional<double> slope_mse_sample;
  bool fallback_used = false;
};

struct RunResult {
  std::vector<RunRecord> trace;
  ParamVector final_x;
  bool diverged = false;
  std::size_t diverged_at = 0;
};

using StepHook = std::function<void(const OptimizerState&, const StepReport&)>;

/// Executes schedule.T steps from x0. A divergence is recorded, not thrown.
inline RunResult run(const AdversaryRule& rule,
                     const StochasticProblem& problem,
                     const Schedule& schedule, const ParamVector& x0,
                     std::uint64_t seed, const StepHook& hook = nullptr) {
  rule.validate();
  OptimizerState state(x0);
  RunStreams streams(seed);
  RunResult result;
  result.trace.reserve(schedule.T);
  for (std::size_t t = 0; t < schedule.T; ++t) {
    StepReport rep;
    try {
      rep = step(rule, state, problem, schedule, streams);
    } catch (const DivergedError& e) {
      result.diverged = true;
      result.diverged_at = e.iteration;
      break;
    }
    RunRecord rec;
    rec.t = t;
    rec.loss = rep.loss_before;
    rec.grad_norm_sq = rep.grad_norm_sq_full;
    rec.grad_norm_sq_at_adversary = rep.grad_norm_sq_full_at_adversary;
    rec.eps_norm = norm(rep.epsilon);
    rec.slope_mse_sample = rep.slope_mse_sample;
    rec.fallback_used = rep.fallback_used;
    result.trace.push_back(rec);
    if (hook) hook(state, rep);
  }
  result.final_x = state.x;
  return result;
}

/// Stochastic Frank-Wolfe over the l2 ball of radius rho, maximizing the
/// objective whose stochastic gradients `grad_sampler(eps, stream)` provides.
/// With iters = 1 and gamma = 1 this reduces to the closed-form adversary of
/// the averaged gradient draw.
template <typename GradSampler>
ParamVector sfw(GradSampler&& grad_sampler, std::size_t dim, double rho,
                std::size_t iters, std::span<const std::size_t> batch_sizes,
                std::span<const double> gammas, RandomStream& stream) {
  if (iters < 1) throw std::invalid_argument("sfw requires iters >= 1");
  if (batch_sizes.size() != iters || gammas.size() != iters)
    throw std::invalid_argument("sfw: schedule lengths must equal iters");
  ParamVector eps(dim, 0.0);
  for (std::size_t it = 0; it < iters; ++it) {
    ParamVector ghat(dim, 0.0);
    for (std::size_t b = 0; b < batch_sizes[it]; ++b)
      axpy(1.0, grad_sampler(eps, stream), ghat);
    const double scale = 1.0 / static_cast<double>(batch_sizes[it]);
    for (double& g : ghat) g *= scale;
    bool fallback = false;
    const ParamVector v = adversary(ghat, rho, &fallback);
    const double gamma = gammas[it];
    for (std::size_t i = 0; i < dim; ++i)
      eps[i] = (1.0 - gamma) * eps[i] + gamma * v[i];
  }
  return eps;
}

}  // namespace vasso
