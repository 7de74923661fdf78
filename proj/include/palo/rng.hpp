#pragma once

#include <cstdint>
#include <string_view>

namespace palo {

// 64-bit FNV-1a. Used for config hashes and for deriving RNG streams from
// string ids; stable across platforms.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t& state);

// xoshiro256** with SplitMix64 seeding. We deliberately avoid <random>
// distributions: their output is implementation-defined and the artifact
// promises byte-identical files for a fixed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Unbiased integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  int below_int(int bound);
  // Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  // Box-Muller; second deviate cached.
  double normal(double mean = 0.0, double stddev = 1.0);

 private:
  std::uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// Counter-based stream derivation: the stream for (seed, a, b) does not depend
// on how many draws other streams made, so work can be re-ordered or
// parallelised without changing results.
Rng derive_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                  std::uint64_t c = 0);
Rng derive_stream(std::uint64_t seed, std::string_view id, std::uint64_t a = 0,
                  std::uint64_t b = 0);

}  // namespace palo
