// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace toolvoc {

// Deterministic RNG wrapper. mt19937_64 itself is fully specified by the
// standard, but the std distributions are not, so the transforms here are
// hand-rolled to make outputs byte-identical across compilers and platforms.
class DetRng {
 public:
  explicit DetRng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be > 0. Rejection-free modulo is fine
  // here: n is always tiny relative to 2^64, the bias is < 2^-50.
  uint64_t below(uint64_t n) { return engine_() % n; }

  // Standard normal via Box-Muller (the polar form would consume a
  // data-dependent number of draws, which makes replay brittle).
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 == 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

// Splits a parent seed into a child stream. splitmix64 finalizer: cheap and
// well mixed, so adjacent (seed, salt) pairs do not produce correlated streams.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace toolvoc
