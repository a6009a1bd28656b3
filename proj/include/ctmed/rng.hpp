#pragma once

#include <cstdint>
#include <random>

namespace ctmed {

// splitmix64 finalizer. Cheap, well mixed, and stable across platforms,
// so it is safe to bake derived seed values into tests.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream seed for replication `rep` of the cell identified by `cell`.
// Distinct (cell, rep) pairs get distinct, independent-looking streams,
// and the result does not depend on any enumeration order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t cell, std::uint64_t rep) {
  return base ^ splitmix64(splitmix64(cell) + rep);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace ctmed
