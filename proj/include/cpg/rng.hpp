// Seeded random streams with structured seed derivation.
//
// Every stochastic component (initial states, policy noise, hyperpolicy
// draws) pulls from its own RngStream, whose seed is derived from a tuple of
// integer ids (master seed, sweep index, seed index, iteration, phase,
// trajectory index). This keeps runs byte-reproducible and independent of
// scheduling order when cells of a run matrix execute concurrently.

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace cpg {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Hash a tuple of ids into a stream seed. Order-sensitive.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x853c49e6748fea9bull;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

// Deterministic random stream. Uniform and Gaussian variates are generated
// explicitly (53-bit mantissa / Box-Muller) so the byte-level output depends
// only on the mt19937_64 sequence, not on standard-library distribution
// internals.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in {0, ..., n-1}.
  int uniform_int(int n) {
    int k = static_cast<int>(uniform() * n);
    return k < n ? k : n - 1;
  }

  // Standard normal via Box-Muller with an explicit spare.
  double normal() {
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
    const double phi = 2.0 * M_PI * u2;
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cpg
