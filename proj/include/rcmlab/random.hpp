#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rcm {

// splitmix64 finalizer; a bijection on 64-bit words with full avalanche.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t HashCombine(std::uint64_t seed, std::uint64_t value) {
  return Mix64(seed ^ Mix64(value + 0x632be59bd9b4e019ULL));
}

// Top 53 bits mapped to [0, 1).
constexpr double ToUnit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Independent stream for a named purpose under a base seed.
constexpr std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream) {
  return HashCombine(Mix64(base), stream);
}

using Engine = std::mt19937_64;

inline Engine MakeEngine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(Mix64(seed)),
                    static_cast<std::uint32_t>(Mix64(seed) >> 32)};
  return Engine(seq);
}

inline double Uniform01(Engine& rng) {
  return ToUnit(rng());
}

}  // namespace rcm
