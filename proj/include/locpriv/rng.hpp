#pragma once

#include <cstdint>
#include <random>

namespace locpriv {

// Counter-based stream derivation. Every random draw in an experiment comes
// from an engine keyed by (seed, trial, slot, stream), so a trial's draws do
// not depend on which thread ran it or on which trials ran before it.
inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class Stream : std::uint64_t {
  flexibility = 1,
  location = 2,
  report = 3,
  misc = 4,
};

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t trial, std::uint64_t slot,
                          Stream stream) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ trial);
  key = splitmix64(key ^ (slot * 0x100000001b3ULL));
  key = splitmix64(key ^ static_cast<std::uint64_t>(stream));
  return Engine(key);
}

// Uniform on [0, 1).
inline double uniform01(Engine& engine) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine);
}

}  // namespace locpriv
