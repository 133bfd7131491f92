#pragma once

#include <cstdint>
#include <random>

namespace fqr {

// splitmix64 finalizer; good avalanche for key derivation.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent stream key for (seed, replication, stream id). Replications
// can run in any order or in parallel without sharing generator state.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t rep,
                                std::uint64_t stream) {
  std::uint64_t k = mix64(seed);
  k = mix64(k ^ (0x9e3779b97f4a7c15ull + rep));
  k = mix64(k ^ (0xbf58476d1ce4e5b9ull + stream));
  return k;
}

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t rep,
                                  std::uint64_t stream) {
  return std::mt19937_64(stream_key(seed, rep, stream));
}

}  // namespace fqr
