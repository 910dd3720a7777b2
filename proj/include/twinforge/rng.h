#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace twinforge {

std::uint64_t SplitMix64(std::uint64_t x);

/// Child seed for a named stream or an index. Order-independent: the result
/// depends only on (seed, key), so parallel callers agree with serial ones.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t key);
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view stream);

/// mt19937_64 plus distribution helpers with a fixed, library-independent
/// bit-level definition (the <random> distributions are implementation
/// defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t Next() { return engine_(); }
  /// Uniform in [0, 1).
  double Uniform01();
  /// Uniform in [lo, hi).
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }
  /// Uniform integer in [lo, hi], unbiased.
  std::int64_t UniformInt(std::int64_t lo, std::int64_t hi);
  double Exponential(double mean);
  double Normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace twinforge
