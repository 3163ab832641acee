#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "vasso/problem.hpp"
#include "vasso/problems.hpp"
#include "vasso/rng.hpp"
#include "vasso/vec.hpp"

namespace vasso {

/// Batch of examples with labels in {0, 1}.
struct Batch {
  std::vector<ParamVector> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
};

inline Batch batch_from(const Dataset& ds,
                        const std::vector<std::size_t>& indices) {
  Batch b;
  b.inputs.reserve(indices.size());
  b.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    b.inputs.push_back({ds.points[i][0], ds.points[i][1]});
    b.labels.push_back(ds.labels[i]);
  }
  return b;
}

inline Batch full_batch(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch_from(ds, idx);
}

// logistic loss on margin m = y * z with y in {-1, +1}
inline double logistic_loss(double margin) {
  if (margin < -30.0) return -margin;
  return std::log1p(std::exp(-margin));
}

/// Fully connected net with tanh hidden layers and a scalar linear output
/// logit, trained with the mean logistic loss. Parameters are a single flat
/// vector: per layer, weights (out x in, row-major) then biases.
class Mlp {
 public:
  explicit Mlp(std::vector<std::size_t> layer_sizes)
      : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2 || sizes_.back() != 1)
      throw std::invalid_argument("mlp needs >= 2 layers and scalar output");
  }

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }

  std::size_t n_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
      n += sizes_[l + 1] * (sizes_[l] + 1);
    return n;
  }

  /// Symmetric uniform +-1/sqrt(fan_in) per layer.
  ParamVector init_params(RandomStream& stream) const {
    ParamVector p(n_params());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      const std::size_t count = sizes_[l + 1] * (sizes_[l] + 1);
      for (std::size_t i = 0; i < count; ++i)
        p[off + i] = bound * (2.0 * stream.uniform() - 1.0);
      off += count;
    }
    return p;
  }

  struct Cache {
    std::vector<std::size_t> sizes;           // signature for staleness check
    ParamVector params;
    std::vector<std::vector<ParamVector>> acts;  // acts[l][sample]
    std::vector<int> labels;
  };

  std::pair<double, Cache> forward(const ParamVector& params,
                                   const Batch& batch) const {
    if (params.size() != n_params())
      throw DimensionMismatch(params.size(), n_params());
    if (batch.size() == 0) throw std::invalid_argument("empty batch");

    Cache cache;
    cache.sizes = sizes_;
    cache.params = params;
    cache.labels = batch.labels;
    cache.acts.resize(sizes_.size());
    cache.acts[0] = batch.inputs;

    const std::size_t n_layers = sizes_.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto [w_off, b_off] = layer_offsets(l);
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      cache.acts[l + 1].resize(batch.size());
      for (std::size_t s = 0; s < batch.size(); ++s) {
        const ParamVector& a = cache.acts[l][s];
        ParamVector z(out);
        for (std::size_t o = 0; o < out; ++o) {
          double acc = params[b_off + o];
          const std::size_t row = w_off + o * in;
          for (std::size_t i = 0; i < in; ++i) acc += params[row + i] * a[i];
          z[o] = (l + 1 < n_layers) ? std::tanh(acc) : acc;
        }
        cache.acts[l + 1][s] = std::move(z);
      }
    }

    double loss = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const double y = batch.labels[s] ? 1.0 : -1.0;
      loss += logistic_loss(y * cache.acts.back()[s][0]);
    }
    return {loss / static_cast<double>(batch.size()), std::move(cache)};
  }

  /// Gradient of the mean batch loss w.r.t. the flat parameter vector.
  ParamVector backward(const Cache& cache) const {
    if (cache.sizes != sizes_ || cache.params.size() != n_params())
      throw std::runtime_error("stale forward cache");
    const std::size_t n = cache.labels.size();
    const std::size_t n_layers = sizes_.size() - 1;
    ParamVector grad(n_params(), 0.0);

    for (std::size_t s = 0; s < n; ++s) {
      const double y = cache.labels[s] ? 1.0 : -1.0;
      const double z = cache.acts.back()[s][0];
      // d loss / d z, already divided by batch size
      ParamVector delta{-y / (1.0 + std::exp(y * z)) /
                        static_cast<double>(n)};
      for (std::size_t l = n_layers; l-- > 0;) {
        const auto [w_off, b_off] = layer_offsets(l);
        const std::size_t in = sizes_[l], out = sizes_[l + 1];
        const ParamVector& a = cache.acts[l][s];
        ParamVector delta_prev(in, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
          const double d = delta[o];
          grad[b_off + o] += d;
          const std::size_t row = w_off + o * in;
          for (std::size_t i = 0; i < in; ++i) {
            grad[row + i] += d * a[i];
            delta_prev[i] += d * cache.params[row + i];
          }
        }
        if (l > 0) {
          // back through tanh of the previous layer's output
          const ParamVector& act = cache.acts[l][s];
          for (std::size_t i = 0; i < in; ++i)
            delta_prev[i] *= 1.0 - act[i] * act[i];
        }
        delta = std::move(delta_prev);
      }
    }
    return grad;
  }

  double logit(const ParamVector& params, const ParamVector& input) const {
    Batch b;
    b.inputs = {input};
    b.labels = {0};
    auto [loss, cache] = forward(params, b);
    (void)loss;
    return cache.acts.back()[0][0];
  }

 private:
  std::pair<std::size_t, std::size_t> layer_offsets(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t k = 0; k < l; ++k)
      off += sizes_[k + 1] * (sizes_[k] + 1);
    return {off, off + sizes_[l + 1] * sizes_[l]};
  }

  std::vector<std::size_t> sizes_;
};

/// StochasticProblem over an Mlp and a fixed dataset; minibatches are drawn
/// uniformly with replacement, so the stochastic gradient is unbiased.
class MlpProblem : public StochasticProblem {
 public:
  MlpProblem(Mlp net, Dataset data, std::size_t batch_size)
      : net_(std::move(net)), data_(std::move(data)), batch_size_(batch_size) {
    if (batch_size_ == 0 || data_.size() == 0)
      throw std::invalid_argument("mlp problem needs data and batch size");
  }

  const Mlp& net() const { return net_; }
  const Dataset& data() const { return data_; }

  std::size_t dim() const override { return net_.n_params(); }

  double value(const ParamVector& x, RandomStream& stream) const override {
    const Batch b = sample_batch(stream, batch_size_);
    return net_.forward(x, b).first;
  }

  ParamVector grad(const ParamVector& x, RandomStream& stream) const override {
    return grad_with_batch_fraction(x, stream, 1.0);
  }

  ParamVector grad_with_batch_fraction(const ParamVector& x,
                                       RandomStream& stream,
                                       double fraction) const override {
    const auto bs = static_cast<std::size_t>(
        std::max(1.0, std::round(fraction * double(batch_size_))));
    const Batch b = sample_batch(stream, bs);
    auto [loss, cache] = net_.forward(x, b);
    (void)loss;
    return net_.backward(cache);
  }

  bool has_full_grad() const override { return true; }
  ParamVector full_grad(const ParamVector& x) const override {
    auto [loss, cache] = net_.forward(x, full_batch(data_));
    (void)loss;
    return net_.backward(cache);
  }
  double full_value(const ParamVector& x) const override {
    return net_.forward(x, full_batch(data_)).first;
  }

  double accuracy(const ParamVector& params, const Dataset& test) const {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const double z =
          net_.logit(params, {test.points[i][0], test.points[i][1]});
      if ((z > 0.0) == (test.labels[i] == 1)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
  }

 private:
  Batch sample_batch(RandomStream& stream, std::size_t count) const {
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = stream.below(data_.size());
    return batch_from(data_, idx);
  }

  Mlp net_;
  Dataset data_;
  std::size_t batch_size_;
};

}  // namespace vasso
