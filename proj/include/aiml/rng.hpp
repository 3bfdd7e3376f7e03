#pragma once

// Seeded random streams shared by the samplers, generators and fitters.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace aiml {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Child seed for run `index` of a batch started from `master`. Stable across
// platforms so runs can be dispatched in any order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// Uniform double in [0, 1) built from the top 53 bits. Avoids relying on the
// library's uniform_real_distribution so draws match across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in (0, 1).
inline double uniform_open01(Rng& rng) {
  double u = 0.0;
  do {
    u = uniform01(rng);
  } while (u == 0.0);
  return u;
}

// Uniform integer in [0, n) by rejection, n > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r = 0;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

// Index drawn with probability proportional to `weights` (nonnegative,
// positive total). Falls back to the last positive entry on round-off.
inline std::size_t draw_categorical(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return last_positive;
}

// log of a Gamma(shape, 1) draw. Small shapes use the boost
// G(a) = G(a + 1) * U^(1/a) in log space so the draw never underflows.
inline double log_gamma_draw(Rng& rng, double shape) {
  if (shape < 1.0) {
    const double boosted = log_gamma_draw(rng, shape + 1.0);
    return boosted + std::log(uniform_open01(rng)) / shape;
  }
  // Marsaglia & Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    // Box-Muller on uniform01 draws.
    const double u1 = uniform_open01(rng);
    const double u2 = uniform01(rng);
    const double x = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    const double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    const double u = uniform_open01(rng);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
      return std::log(d * v);
    }
  }
}

// Beta(alpha, beta) draw via the ratio of two gamma variates.
inline double beta_draw(Rng& rng, double alpha, double beta) {
  const double la = log_gamma_draw(rng, alpha);
  const double lb = log_gamma_draw(rng, beta);
  // a / (a + b) = 1 / (1 + exp(lb - la))
  return 1.0 / (1.0 + std::exp(lb - la));
}

}  // namespace aiml
