#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace affect {

/// Portable pseudo-random source, algorithm id "affect-prng/1":
///   - engine: std::mt19937_64 (bit-exact by the C++ standard)
///   - uniform(): (next() >> 11) * 2^-53, in [0, 1)
///   - normal(): Box-Muller on two uniforms, u1 mapped to (0, 1]; the cosine
///     branch is returned first and the sine branch is cached for the next call
///   - index(n): floor(uniform() * n)
/// std::*_distribution is avoided because its output differs between
/// standard library implementations.
class Prng {
 public:
  static constexpr const char* kAlgorithm = "affect-prng/1";

  explicit Prng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace affect
