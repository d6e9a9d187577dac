#pragma once

#include <cstdint>
#include <random>

namespace hajscc {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; mixes a base seed with a stream tag so independent
/// consumers (init, shuffling, SNR draws, channel noise, sweep points) get
/// decorrelated generators from one user seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kSnr = 3;
inline constexpr std::uint64_t kNoise = 4;
inline constexpr std::uint64_t kValidation = 5;
inline constexpr std::uint64_t kSweep = 6;
inline constexpr std::uint64_t kData = 7;
}  // namespace stream

}  // namespace hajscc
