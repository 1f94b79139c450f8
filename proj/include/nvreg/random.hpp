#pragma once

#include <cstdint>
#include <random>

namespace nvreg {

// Seed of the independent stream for work item `index`; decorrelated by splitmix64.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

// Uniform double in [0, 1); fixed bit recipe so results do not depend on the
// standard library's distribution implementation.
inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

}  // namespace nvreg
