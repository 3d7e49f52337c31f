#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lacal {

/// Seeded generator with platform-stable distributions. The standard library
/// distributions are implementation-defined, so draws go through boost.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // N(0, 1)
  std::size_t index(std::size_t n);      // uniform in [0, n)
  std::uint64_t bits() { return engine_(); }

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Derive an independent stream seed from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace lacal
