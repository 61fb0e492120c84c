#include "softctl/core/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace softctl {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ mix64(value + 0x9E3779B97F4A7C15ULL));
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec draw_gaussian(RngStream& rng, const Vec& mean, const Vec& stddev) {
  if (mean.size() != stddev.size()) throw std::invalid_argument("draw_gaussian: dimension mismatch");
  if ((stddev.array() < 0.0).any()) throw std::invalid_argument("draw_gaussian: negative stddev");
  Vec out(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) out[i] = mean[i] + stddev[i] * rng.normal();
  return out;
}

}  // namespace softctl
