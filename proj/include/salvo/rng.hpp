#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "salvo/types.hpp"

namespace salvo {

/// Deterministic uniform/normal sampler. Draws are produced by explicit bit
/// manipulation of mt19937_64 output so sequences are identical on every
/// platform (std::*_distribution makes no such guarantee).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return double(gen_() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [0, n).
  uint64_t uniformInt(uint64_t n) { return uint64_t(uniform() * double(n)) % n; }

  /// Box-Muller on deterministic uniforms.
  double normal() {
    if (haveSpare_) {
      haveSpare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    spare_ = r * std::sin(th);
    haveSpare_ = true;
    return r * std::cos(th);
  }

  uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0;
  bool haveSpare_ = false;
};

/// Inverse-CDF draw from a normalized distribution.
inline size_t sampleDiscrete(const std::vector<double>& probabilities, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0;
  for (size_t i = 0; i < probabilities.size(); ++i) {
    acc += probabilities[i];
    if (u < acc) return i;
  }
  return probabilities.size() - 1;
}

/// splitmix64, used to derive independent seeds from one root seed.
inline uint64_t hashSeed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace salvo
