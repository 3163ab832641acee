#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "vasso/vec.hpp"

namespace vasso {

namespace detail {

// splitmix64 finalizer; also used to derive effective seeds for substreams.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Counter-based deterministic random stream keyed by (seed, stream-id,
/// counter). The draw at a given counter depends only on the key, so any
/// stream position can be replayed and child streams never share state.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed),
        stream_(stream_id),
        key_(detail::mix64(seed ^ detail::mix64(stream_id + detail::kGolden))) {
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

  /// Independent substream; deterministic function of (seed, stream-id, id).
  RandomStream child(std::uint64_t id) const {
    return RandomStream(seed_, detail::mix64(stream_ + detail::kGolden) ^ id);
  }

  std::uint64_t next_u64() {
    return detail::mix64(key_ + detail::kGolden * counter_++);
  }

  /// Uniform draw in the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes exactly two counter positions.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// iid N(0, sigma^2) entries; deterministic given the stream state.
inline ParamVector gaussian_vector(std::size_t dim, double sigma,
                                   RandomStream& stream) {
  ParamVector out(dim, 0.0);
  if (sigma == 0.0) return out;
  for (double& x : out) x = sigma * stream.normal();
  return out;
}

}  // namespace vasso
