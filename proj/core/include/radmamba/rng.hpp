#pragma once
// Deterministic RNG used everywhere seeds matter. Distributions are
// hand-rolled on top of mt19937_64 so streams are reproducible across
// standard library implementations.

#include <cstdint>
#include <random>
#include <vector>

namespace radmamba {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Independent stream derived from (seed, stream id).
  static Rng derive(uint64_t seed, uint64_t stream) {
    return Rng(splitmix64(splitmix64(seed) ^ stream));
  }

  uint64_t next() { return gen_(); }

  double uniform() {  // [0,1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // Box-Muller; one fresh pair per call keeps the stream position simple.
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  int64_t integer(int64_t n) {  // [0,n), unbiased
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t v = next();
    while (v >= limit) v = next();
    return static_cast<int64_t>(v % un);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i)
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(integer(i + 1))]);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace radmamba
