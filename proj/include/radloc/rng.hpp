#pragma once

#include <cstdint>
#include <random>

namespace radloc {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijection on 64-bit words with good avalanche.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based stream derivation: the generator for (stream, index) depends
/// only on the master seed and the two counters, never on execution order.
inline Rng derive_rng(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t index) {
  const std::uint64_t s = splitmix64(splitmix64(master_seed ^ splitmix64(stream)) ^ splitmix64(~index));
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index)};
  return Rng(seq);
}

}  // namespace radloc
