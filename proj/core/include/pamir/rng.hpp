// Seed derivation and sampling helpers. Every concurrent unit of work
// (chain, replication) draws from its own engine derived from the master
// seed and a stream index, so results do not depend on scheduling.
#pragma once

#include "pamir/types.hpp"

#include <cstdint>
#include <random>

namespace pamir {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Mixes (seed, stream, substream) into one well-spread engine seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t substream = 0) {
  std::uint64_t u = splitmix64(seed);
  u = splitmix64(u ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  u = splitmix64(u ^ (0xbf58476d1ce4e5b9ULL * (substream + 1)));
  return u;
}

inline std::mt19937_64 seeded_engine(std::uint64_t seed,
                                     std::uint64_t stream = 0,
                                     std::uint64_t substream = 0) {
  return std::mt19937_64(derive_seed(seed, stream, substream));
}

inline Vector standard_normal_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

// Multinomial draw by sequential conditional binomials.
IntVector multinomial_draw(std::mt19937_64& rng, std::int64_t m,
                           const Composition& z);

}  // namespace pamir
