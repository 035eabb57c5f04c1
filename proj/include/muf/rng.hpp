#pragma once

#include <cstdint>
#include <cstddef>

namespace muf {

// Deterministic random stream. splitmix64 core with explicit samplers so
// that runs replay bit-identically regardless of the C++ standard library
// in use (std::*_distribution output is implementation defined).
class Rng {
public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  // Independent stream for one particle at one step of one run.
  static Rng derive(uint64_t seed, uint64_t step, uint64_t particle);

  uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01();
  // Uniform on (0, 1], safe as a log argument.
  double uniform_pos();
  double uniform(double lo, double hi);
  // Uniform on [0, n).
  size_t uniform_int(size_t n);

  double normal(double mean, double var);
  double gamma(double shape);  // scale 1
  double beta(double a, double b);
  long poisson(double rate);

private:
  uint64_t state_;
};

}  // namespace muf
