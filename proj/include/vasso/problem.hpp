#pragma once

#include <optional>
#include <stdexcept>

#include "vasso/rng.hpp"
#include "vasso/vec.hpp"

namespace vasso {

/// Known problem constants, when the instance can declare them.
/// sigma follows the total-noise convention E||g - grad f||^2 = sigma^2.
struct ProblemMeta {
  std::optional<double> sigma;
  std::optional<double> smoothness_L;
  std::optional<double> lower_bound_fstar;
};

/// Oracle contract for a stochastic objective. Implementations must be pure
/// functions of (x, stream) so that runs holding private streams can execute
/// concurrently against a shared problem instance.
class StochasticProblem {
 public:
  virtual ~StochasticProblem() = default;

  virtual std::size_t dim() const = 0;

  /// Minibatch loss estimate at x.
  virtual double value(const ParamVector& x, RandomStream& stream) const = 0;

  /// Unbiased minibatch gradient at x.
  virtual ParamVector grad(const ParamVector& x,
                           RandomStream& stream) const = 0;

  /// Minibatch gradient with the batch size scaled by `fraction` of the
  /// problem's nominal batch, for independent-batch adversary variants.
  virtual ParamVector grad_with_batch_fraction(const ParamVector& x,
                                               RandomStream& stream,
                                               double /*fraction*/) const {
    return grad(x, stream);
  }

  virtual bool has_full_grad() const { return false; }

  virtual ParamVector full_grad(const ParamVector& /*x*/) const {
    throw std::logic_error("exact full gradient not available");
  }

  virtual double full_value(const ParamVector& /*x*/) const {
    throw std::logic_error("exact full value not available");
  }

  virtual ProblemMeta meta() const { return {}; }
};

}  // namespace vasso
