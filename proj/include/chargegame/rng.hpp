#pragma once

#include <cstdint>

namespace chargegame {

// Stateless counter-based random stream. Every draw is a pure function of
// (seed, stream, counter), so simulations can hand each player an independent
// substream and produce the same numbers no matter how the work is scheduled
// across threads.
//
// Construction: splitmix64-style finalizer applied to a seed/stream/counter
// chain. Not cryptographic; statistical quality is plenty for Monte Carlo.
namespace rng {

inline uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

inline uint64_t word(uint64_t seed, uint64_t stream, uint64_t counter) {
  uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ull);
  h = mix64(h ^ (stream + 0x9e3779b97f4a7c15ull));
  return mix64(h + counter * 0x9e3779b97f4a7c15ull);
}

// Uniform double in [0, 1), 53 mantissa bits.
inline double uniform(uint64_t seed, uint64_t stream, uint64_t counter) {
  return static_cast<double>(word(seed, stream, counter) >> 11) * 0x1.0p-53;
}

}  // namespace rng
}  // namespace chargegame
