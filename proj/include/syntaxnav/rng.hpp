#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace syntaxnav {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a root seed and a path of labels,
// e.g. derive_seed({seed, kRolloutStream, iteration, episode}).
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6A09E667F3BCC909ull;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

inline std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> parts) {
  return std::mt19937_64(derive_seed(parts));
}

// Named substreams so components can be varied independently.
enum Stream : std::uint64_t {
  kWorldStream = 0x776F726C64,
  kInitStream = 0x696E6974,
  kRolloutStream = 0x726F6C6C,
  kBatchStream = 0x6261746368,
  kNoiseStream = 0x6E6F697365,
};

}  // namespace syntaxnav
