#pragma once

#include <cstdint>
#include <random>

namespace ddopt {

/// SplitMix64 finalizer. Used to derive independent stream seeds from
/// (base_seed, stream, index) so trials are reproducible in any order.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) noexcept {
  return mix64(mix64(base ^ mix64(stream)) + index);
}

// Stream tags for derive_seed.
namespace streams {
inline constexpr std::uint64_t scene = 0x5343454e45ULL;
inline constexpr std::uint64_t noise = 0x4e4f495345ULL;
inline constexpr std::uint64_t waveform = 0x5741564546ULL;
}  // namespace streams

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

}  // namespace ddopt
