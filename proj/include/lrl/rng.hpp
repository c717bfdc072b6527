#pragma once

// Reproducible random streams.  A master seed is split into independent
// substreams by hashing (master, stream ids) with splitmix64; all samplers
// used in contract-bound code live here so bond sets and MC estimates are
// bit-identical across standard libraries.

#include <cmath>
#include <cstdint>
#include <random>

namespace lrl {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64(s);
  s = h ^ b;
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s_(seed), s0_(seed) { next(); next(); }

  // derive an independent substream; documented splitting function
  Rng substream(std::uint64_t id) const { return Rng(hash_combine(s0_, id)); }
  Rng substream(std::uint64_t a, std::uint64_t b) const {
    return Rng(hash_combine(hash_combine(s0_, a), b));
  }

  std::uint64_t next() { return splitmix64(s_); }

  double uniform() {  // in [0,1)
    return double(next() >> 11) * 0x1.0p-53;
  }

  std::uint64_t below(std::uint64_t n) {  // unbiased in [0,n)
    std::uint64_t x, r;
    do { x = next(); r = x % n; } while (x - r > std::uint64_t(-1) - (n - 1));
    return r;
  }

  double normal() {
    // Box-Muller, cached second value
    if (have_cache_) { have_cache_ = false; return cache_; }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cache_ = r * std::sin(6.283185307179586477 * u2);
    have_cache_ = true;
    return r * std::cos(6.283185307179586477 * u2);
  }

  // Binomial(n, p): CDF inversion for small np, BTRS otherwise.
  std::uint64_t binomial(std::uint64_t n, double p) {
    if (p <= 0 || n == 0) return 0;
    if (p >= 1) return n;
    bool flip = p > 0.5;
    if (flip) p = 1 - p;
    const double np = double(n) * p;
    std::uint64_t k = (np < 30.0) ? binomial_inv(n, p) : binomial_btrs(n, p);
    return flip ? n - k : k;
  }

 private:
  std::uint64_t binomial_inv(std::uint64_t n, double p) {
    // sequential inversion; exact for p<=0.5, cost O(np + sqrt(np))
    const double q = 1 - p;
    const double s = p / q;
    double f = std::exp(double(n) * std::log(q));  // P(X=0)
    double u = uniform();
    std::uint64_t k = 0;
    double cdf = f;
    while (u > cdf) {
      ++k;
      if (k > n) return n;  // fp underflow guard
      f *= s * double(n - k + 1) / double(k);
      cdf += f;
      if (f <= 0) return k;  // underflow: all remaining mass consumed
    }
    return k;
  }

  std::uint64_t binomial_btrs(std::uint64_t n, double p) {
    // Hormann's BTRS transformed-rejection sampler (valid for np >= 10)
    const double q = 1 - p;
    const double spq = std::sqrt(double(n) * p * q);
    const double b = 1.15 + 2.53 * spq;
    const double a = -0.0873 + 0.0248 * b + 0.01 * p;
    const double c = double(n) * p + 0.5;
    const double v_r = 0.92 - 4.2 / b;
    const double alpha = (2.83 + 5.1 / b) * spq;
    const double lpq = std::log(p / q);
    const double m = std::floor(double(n + 1) * p);
    const double h = std::lgamma(m + 1) + std::lgamma(double(n) - m + 1);
    for (;;) {
      double u = uniform() - 0.5;
      double v = uniform();
      const double us = 0.5 - std::abs(u);
      const double kd = std::floor((2 * a / us + b) * u + c);
      if (kd < 0 || kd > double(n)) continue;
      if (us >= 0.07 && v <= v_r) return std::uint64_t(kd);
      v = std::log(v * alpha / (a / (us * us) + b));
      const double lhs = h - std::lgamma(kd + 1) - std::lgamma(double(n) - kd + 1) +
                         (kd - m) * lpq;
      if (v <= lhs) return std::uint64_t(kd);
    }
  }

  std::uint64_t s_;
  std::uint64_t s0_;
  bool have_cache_ = false;
  double cache_ = 0;
};

}  // namespace lrl
