#pragma once

#include <cstdint>
#include <random>

namespace sqz {

/// Well-mixed 64-bit hash (splitmix64 finaliser).
std::uint64_t splitmix64(std::uint64_t x);

/// Independent seed for (master seed, purpose stream, block or resample index). Generating
/// per block rather than per worker keeps outputs independent of the thread count.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return Rng(derive_seed(seed, stream, index));
}

// Purpose streams.
inline constexpr std::uint64_t kStreamPairs = 1;
inline constexpr std::uint64_t kStreamTags = 2;
inline constexpr std::uint64_t kStreamHom = 3;
inline constexpr std::uint64_t kStreamTes = 4;
inline constexpr std::uint64_t kStreamCorrelation = 5;
inline constexpr std::uint64_t kStreamBootstrap = 6;
inline constexpr std::uint64_t kStreamBackground = 7;

}  // namespace sqz
