#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace entdist {

// Deterministic random stream with explicit substream derivation.
//
// Every consumer of randomness (a channel, an arm, a drift interval) derives
// its own stream from (seed, tag...) instead of sharing one generator.  That
// is what makes serial and multi-threaded sweeps produce byte-identical
// output: the draw sequence seen by a given channel never depends on what the
// other channels did.
//
// The uniform/normal/poisson samplers are implemented here rather than taken
// from <random> because the standard distributions are not required to be
// reproducible across library implementations; mt19937_64 itself is.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) { gen_.discard(8); }

  // Derive an independent stream from a base seed and up to three tags.
  // SplitMix64 scrambling keeps nearby (seed, tag) tuples uncorrelated.
  static RngStream derive(std::uint64_t seed, std::uint64_t tag0,
                          std::uint64_t tag1 = 0, std::uint64_t tag2 = 0) {
    std::uint64_t x = splitmix(seed ^ 0x243f6a8885a308d3ull);
    x = splitmix(x ^ tag0);
    x = splitmix(x ^ tag1);
    x = splitmix(x ^ tag2);
    return RngStream(x);
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the Marsaglia polar method.  The spare variate is
  // discarded so the draw count per call is self-contained.
  double normal(double sigma = 1.0) {
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return sigma * u * std::sqrt(-2.0 * std::log(s) / s);
  }

  // Poisson sample by Knuth's product-of-uniforms method.  Large means are
  // split into chunks (Poisson(a+b) = Poisson(a) + Poisson(b)) so the
  // per-chunk acceptance product stays far from the double underflow floor.
  std::int64_t poisson(double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
    std::int64_t total = 0;
    constexpr double chunk = 400.0;
    while (mean > chunk) {
      total += poisson_knuth(chunk);
      mean -= chunk;
    }
    return total + poisson_knuth(mean);
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::int64_t poisson_knuth(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::mt19937_64 gen_;
};

}  // namespace entdist
