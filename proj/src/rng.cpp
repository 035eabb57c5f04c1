#include "muf/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace muf {

namespace {

uint64_t splitmix64(uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// One-shot mix for stream derivation.
uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t s = a ^ (b * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull);
  return splitmix64(s);
}

}  // namespace

Rng Rng::derive(uint64_t seed, uint64_t step, uint64_t particle) {
  return Rng(mix(mix(seed, step + 1), particle + 1));
}

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() { return 1.0 - uniform01(); }

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

size_t Rng::uniform_int(size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: empty range");
  // Rejection keeps the draw exactly uniform.
  uint64_t bound = ~0ull - (~0ull % n);
  uint64_t u;
  do {
    u = next_u64();
  } while (u >= bound);
  return static_cast<size_t>(u % n);
}

double Rng::normal(double mean, double var) {
  // Box-Muller without caching the sine branch: replay stays positional.
  double u1 = uniform_pos();
  double u2 = uniform01();
  double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  return mean + std::sqrt(var) * z;
}

double Rng::gamma(double shape) {
  if (shape < 1.0) {
    // Boost via gamma(shape + 1).
    double u = uniform_pos();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze.
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal(0.0, 1.0);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Rng::beta(double a, double b) {
  double x = gamma(a);
  double y = gamma(b);
  return x / (x + y);
}

long Rng::poisson(double rate) {
  if (rate < 0.0) throw std::invalid_argument("poisson: negative rate");
  if (rate == 0.0) return 0;
  // Exact split keeps the multiplication method numerically safe.
  if (rate > 30.0) return poisson(rate / 2.0) + poisson(rate / 2.0);
  double limit = std::exp(-rate);
  long k = 0;
  double prod = uniform01();
  while (prod > limit) {
    ++k;
    prod *= uniform01();
  }
  return k;
}

}  // namespace muf
