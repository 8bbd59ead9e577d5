#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cellscope {

/// Seeded generator with hand-written distributions, so a seed gives the same
/// stream with every standard library (std:: distributions are
/// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal(double mean, double sigma);
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t poisson(double lambda);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finaliser; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;
/// Stable 64-bit FNV-1a hash of a string.
std::uint64_t hash_string(std::string_view text) noexcept;

}  // namespace cellscope
