#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedsel {

using Rng = std::mt19937_64;

// SplitMix64 finalizer, used to derive engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a reproducible RNG for a (seed, path...) address.
///
/// Every random decision in a run draws from a stream addressed by the run
/// seed plus a structural path (e.g. {round, client slot}), so results do not
/// depend on evaluation order or thread scheduling.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(seed);
  for (std::uint64_t id : path) {
    s = splitmix64(s ^ id);
  }
  return Rng(s);
}

}  // namespace fedsel
