#pragma once

// Counter-based seed derivation: every (master, stream, index) triple maps to
// its own generator, so results do not depend on evaluation order or on how
// work is split across threads.

#include <cstdint>
#include <random>

namespace gflm {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return Rng(derive_seed(master, stream, index));
}

/// Stream identifiers, fixed so that seeds stay stable across releases.
namespace streams {
inline constexpr std::uint64_t trial = 1;
inline constexpr std::uint64_t plrt_null = 2;
inline constexpr std::uint64_t at_null = 3;
inline constexpr std::uint64_t test_data = 4;
}  // namespace streams

}  // namespace gflm
