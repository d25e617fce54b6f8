#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vdio {

// Deterministic random source. Gaussian draws go through an explicit
// Box-Muller transform instead of std::normal_distribution, whose output
// sequence is implementation-defined; runs must be bit-identical for a
// given seed on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() {
    return (gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; caches the paired draw
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  // independent child stream; stable under call order of the parent
  Rng fork(uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream))); }

  // splitmix64 finalizer; also used by the counter-based pixel noise below
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Counter-based noise: a deterministic function of (seed, stream, counter),
// independent of evaluation order. Used for per-pixel simulator noise so a
// rendered frame does not depend on scanline order.
inline double hash_uniform(uint64_t seed, uint64_t stream, uint64_t counter) {
  const uint64_t h = Rng::mix(Rng::mix(seed ^ 0x6a09e667f3bcc909ULL) ^
                              Rng::mix(stream * 0x9e3779b97f4a7c15ULL + counter));
  return (h >> 11) * 0x1.0p-53;
}

inline double hash_gaussian(uint64_t seed, uint64_t stream, uint64_t counter) {
  double u1 = hash_uniform(seed, stream, 2 * counter);
  const double u2 = hash_uniform(seed, stream, 2 * counter + 1);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace vdio
