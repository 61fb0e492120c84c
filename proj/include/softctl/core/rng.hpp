#pragma once

#include <cstdint>

#include "softctl/core/types.hpp"

namespace softctl {

/// SplitMix64 finalizer; also used to derive child seeds.
std::uint64_t mix64(std::uint64_t z);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);

/// Counter-based random stream. Draw i depends only on (seed, i), so identical
/// seeds give identical sequences regardless of platform integer semantics.
/// Normals use Box-Muller on two consecutive draws.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

  /// Independent stream with seed hash(seed, index). Does not advance this stream.
  RngStream child(std::uint64_t index) const { return RngStream(hash_combine(seed_, index)); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// mean + stddev (elementwise) * z with z standard normal drawn from rng.
Vec draw_gaussian(RngStream& rng, const Vec& mean, const Vec& stddev);

}  // namespace softctl
