#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace emg2artic {

/// splitmix64 step; used for seeding and for deriving independent sub-seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Combine a base seed with a salt (utterance index, condition hash, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

/// 64-bit FNV-1a, stable across platforms.
std::uint64_t fnv1a(std::string_view text);

/// xoshiro256** generator. Satisfies UniformRandomBitGenerator, but the
/// helpers below should be preferred over <random> distributions: their
/// output is defined bit-for-bit on every platform.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Fisher-Yates shuffle driven by Rng::below.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace emg2artic
