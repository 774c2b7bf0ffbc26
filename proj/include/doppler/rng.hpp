#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace doppler {

/// SplitMix64 generator. Small state makes it cheap to open one stream per
/// (purpose, link, iteration) tuple, which keeps draws independent of
/// evaluation order.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Mixes a seed with any number of 64-bit keys into a new stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// Purpose tags for top-level stream derivation.
enum class Stream : std::uint64_t {
  topology = 1,
  noise_variance = 2,
  truth = 3,
  measurement = 4,
  link = 5,
  init = 6,
  kinematics = 7,
  trial = 8,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream purpose) {
  return derive_seed(seed, {static_cast<std::uint64_t>(purpose)});
}

}  // namespace doppler
