#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tccdse {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Every random draw in a run comes from a named stream derived from the one
// user seed, so adding a consumer never perturbs the others.
inline Rng substream(std::uint64_t seed, std::string_view name) {
  return Rng(mix64(seed ^ mix64(fnv1a64(name))));
}

inline double uniform01(Rng& rng) {
  // 53 random bits -> [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller; avoids libstdc++'s normal_distribution caching state so that a
// draw count is a pure function of the caller's logic.
double standard_normal(Rng& rng);

}  // namespace tccdse
