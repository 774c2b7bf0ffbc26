#include "doppler/rng.hpp"

namespace doppler {

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  SplitMix64 mix(seed ^ 0x5DEECE66DULL);
  std::uint64_t h = mix();
  for (std::uint64_t k : keys) {
    SplitMix64 step(h ^ (k * 0xD6E8FEB86659FD93ULL));
    h = step();
  }
  return h;
}

}  // namespace doppler
