#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace apg {

// Seeded random source. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the value mappings below are written out here
// instead of using <random> distributions, whose algorithms vary by library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent named sub-stream: mixes (seed, name, index) through splitmix64.
  static Rng derive(std::uint64_t seed, std::string_view name,
                    std::uint64_t index = 0);

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [lo, hi], rejection sampled.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view name,
                       std::uint64_t index);

}  // namespace apg
