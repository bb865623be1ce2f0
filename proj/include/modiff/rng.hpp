#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace modiff {

// splitmix64 finalizer; used to derive independent streams from one seed.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives a stream seed as a pure function of (seed, tag, counter), so every
// consumer of randomness is reproducible without serializing generator state.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag, uint64_t counter = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ counter);
}

// Standard-normal sampler with an explicit Box-Muller transform so draw order
// is pinned by this code, not by library internals.
class NormalSampler {
 public:
  explicit NormalSampler(uint64_t seed) : eng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform in (0, 1]; never returns 0 so log() above stays finite.
  double uniform_open() { return double((eng_() >> 11) + 1) * 0x1.0p-53; }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace modiff
