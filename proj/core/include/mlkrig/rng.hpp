#pragma once

#include <cstdint>
#include <random>

namespace mlkrig {

// Seeded generator with platform-independent uniform and normal draws.
// std::uniform_real_distribution and std::normal_distribution are
// implementation-defined, so both transforms are done by hand here.
class Rng {
public:
  static constexpr int kVersion = 1;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on [a, b).
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derive a replicate seed from a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

} // namespace mlkrig
