#pragma once
#include <cstdint>
#include <random>

namespace geoshape {

// splitmix64: cheap, well-mixed stream derivation so that every sample /
// shuffle / init gets its own engine keyed by (root seed, purpose, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ splitmix64(stream)) ^ index);
}

inline std::mt19937_64 make_engine(std::uint64_t root, std::uint64_t stream, std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(root, stream, index));
}

// Named streams so call sites cannot collide by accident.
namespace rng_stream {
constexpr std::uint64_t kSynthSample = 1;
constexpr std::uint64_t kSplit = 2;
constexpr std::uint64_t kMlpInit = 3;
constexpr std::uint64_t kShuffle = 4;
constexpr std::uint64_t kSharpness = 5;
constexpr std::uint64_t kTest = 99;
}  // namespace rng_stream

}  // namespace geoshape
