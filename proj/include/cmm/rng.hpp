#pragma once

// Deterministic stream derivation.  Every stochastic routine receives an
// explicitly seeded generator; concurrent per-object work derives independent
// streams from (seed, iteration, object) so results do not depend on
// scheduling order.

#include <cstdint>
#include <random>

namespace cmm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Mix an arbitrary list of stream identifiers into one 64-bit seed.
template <typename... Ids>
std::uint64_t derive_seed(std::uint64_t seed, Ids... ids) {
  std::uint64_t h = splitmix64(seed);
  ((h = splitmix64(h ^ static_cast<std::uint64_t>(ids))), ...);
  return h;
}

template <typename... Ids>
std::mt19937_64 make_rng(std::uint64_t seed, Ids... ids) {
  return std::mt19937_64(derive_seed(seed, ids...));
}

}  // namespace cmm
