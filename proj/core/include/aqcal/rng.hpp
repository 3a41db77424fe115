#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace aqcal {

// SplitMix64 (Steele, Lea & Flood). Chosen over <random> engines and
// distributions because the output sequence is fixed by the algorithm, so
// seeded runs are identical across compilers and platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  // Standard normal via the Box-Muller transform (one value per call).
  double normal();

 private:
  std::uint64_t state_;
};

// Independent substream seed for (seed, index), e.g. one per sensor.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// k distinct indices from [0, n) in ascending order (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    SplitMix64& rng);

// Uniform random permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, SplitMix64& rng);

}  // namespace aqcal
