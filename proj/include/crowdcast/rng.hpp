#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace crowdcast {

// splitmix64; used to derive independent stream seeds from (seed, lane) tuples.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ splitmix64(~b));
}

// mt19937_64 with hand-rolled samplers. std::* distributions are
// implementation-defined, so every draw goes through uniform01() to keep
// traces reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::uint64_t uniform_int(std::uint64_t n) {  // [0, n), n > 0
    // rejection-free modulo is biased for huge n; n here is tiny (node counts)
    return engine_() % n;
  }

  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  double pareto(double shape, double scale) {
    return scale * std::pow(1.0 - uniform01(), -1.0 / shape);
  }

  double normal(double mean, double std) {
    if (!have_spare_) {
      double u1 = uniform01(), u2 = uniform01();
      while (u1 <= 0.0) u1 = uniform01();
      const double r = std::sqrt(-2.0 * std::log(u1));
      const double theta = 2.0 * 3.14159265358979323846 * u2;
      spare_ = r * std::sin(theta);
      have_spare_ = true;
      return mean + std * r * std::cos(theta);
    }
    have_spare_ = false;
    return mean + std * spare_;
  }

  double lognormal(double log_mean, double log_std) {
    return std::exp(normal(log_mean, log_std));
  }

  // Normal truncated to [floor, inf); rejection is fine while floor stays a
  // few sigmas below the mean, which holds for contact durations.
  double truncated_normal(double mean, double std, double floor) {
    for (int i = 0; i < 1000; ++i) {
      const double v = normal(mean, std);
      if (v >= floor) return v;
    }
    return floor;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace crowdcast
