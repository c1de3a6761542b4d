#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedrate {

// Mixes a list of keys into a single 64-bit seed (splitmix64 finalizer).
// Streams derived from distinct key tuples are treated as independent, which
// is what lets clients and sweep cells be generated in any order.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x9E3779B97F4A7C15ULL;
  for (std::uint64_t k : keys) {
    h ^= k + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    h += 0x9E3779B97F4A7C15ULL;
    h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
    h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
    h ^= h >> 31;
  }
  return h;
}

using Stream = std::mt19937_64;

inline Stream make_stream(std::initializer_list<std::uint64_t> keys) {
  return Stream{mix_seed(keys)};
}

// Stream-purpose tags so that e.g. training shuffles never alias data draws.
namespace stream_tag {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kClient = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kEval = 4;
inline constexpr std::uint64_t kNonParticipating = 5;
inline constexpr std::uint64_t kTheta = 6;
inline constexpr std::uint64_t kBootstrap = 7;
inline constexpr std::uint64_t kCell = 8;
}  // namespace stream_tag

}  // namespace fedrate
