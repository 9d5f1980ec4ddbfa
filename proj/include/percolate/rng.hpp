#pragma once
// Counter-based random streams (Philox 2x64, 10 rounds). Every draw is
// addressed by (master_seed, stream, replica_index, element); the mapping to
// generator input is injective (key = master_seed, counter word 0 =
// replica_index, counter word 1 = stream tag in the top 16 bits | element in
// the low 48), so any single uniform can be regenerated on demand, in any
// order, from any thread.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace perc {

// Purpose tags keep substreams (percolation bits, blue marks, pair links,
// bootstrap resampling) from ever colliding under one master seed.
enum class Stream : std::uint64_t {
  bond_layer = 1,
  site_layer = 2,
  blue_layer = 3,
  pair_layer = 4,
  bootstrap = 5,
};

struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t replica_index = 0;
  Stream stream = Stream::bond_layer;
};

namespace detail {

inline void philox2x64_round(std::uint64_t& x0, std::uint64_t& x1,
                             std::uint64_t key) {
  constexpr std::uint64_t mult = 0xD2B74407B1CE6E93ULL;
  const unsigned __int128 prod = static_cast<unsigned __int128>(mult) * x0;
  const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
  const std::uint64_t lo = static_cast<std::uint64_t>(prod);
  x0 = hi ^ key ^ x1;
  x1 = lo;
}

}  // namespace detail

inline std::uint64_t philox2x64(std::uint64_t key, std::uint64_t ctr0,
                                std::uint64_t ctr1) {
  std::uint64_t x0 = ctr0, x1 = ctr1, k = key;
  constexpr std::uint64_t weyl = 0x9E3779B97F4A7C15ULL;
  for (int round = 0; round < 10; ++round) {
    detail::philox2x64_round(x0, x1, k);
    k += weyl;
  }
  return x0;
}

constexpr std::uint64_t max_element_index = (1ULL << 48) - 1;

inline std::uint64_t raw_draw(const SeedSpec& seed, std::uint64_t element) {
  assert(element <= max_element_index);
  return philox2x64(seed.master_seed, seed.replica_index,
                    (static_cast<std::uint64_t>(seed.stream) << 48) | element);
}

// Uniform in [0,1) with 53 random bits.
inline double u01(const SeedSpec& seed, std::uint64_t element) {
  return static_cast<double>(raw_draw(seed, element) >> 11) * 0x1.0p-53;
}

// p = 1 - e^{-beta}, computed without cancellation for small beta.
inline double p_of_beta(double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("p_of_beta: beta must be finite and >= 0");
  return -std::expm1(-beta);
}

inline double beta_of_p(double p) {
  if (!(p >= 0.0) || !(p < 1.0))
    throw std::invalid_argument("beta_of_p: need 0 <= p < 1");
  return -std::log1p(-p);
}

}  // namespace perc
