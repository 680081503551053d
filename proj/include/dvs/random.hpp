#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace dvs {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). Rejection sampling, so the result does not
/// depend on the standard library's distribution implementation.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n == 0) throw std::domain_error("uniform_below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline bool uniform_bit(Rng& rng) { return (rng() >> 63) != 0; }

/// Standard normal via Box-Muller (no cached spare, fully reproducible).
inline double standard_normal(Rng& rng) {
  double u1;
  do {
    u1 = uniform_unit(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Index drawn with probability proportional to weights[i] (weights >= 0,
/// not all zero).
inline std::size_t pick_weighted(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::domain_error("pick_weighted: negative weight");
    total += w;
  }
  if (total <= 0.0) throw std::domain_error("pick_weighted: zero total weight");
  const double target = uniform_unit(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  return weights.size() - 1;
}

/// Index drawn with probability proportional to exp(log_weights[i]).
/// -inf entries carry zero weight.
inline std::size_t pick_log_weighted(Rng& rng, std::span<const double> log_weights) {
  double max_lw = -INFINITY;
  for (double lw : log_weights) max_lw = std::max(max_lw, lw);
  if (!std::isfinite(max_lw))
    throw std::domain_error("pick_log_weighted: all weights are zero");
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = std::isfinite(log_weights[i]) ? std::exp(log_weights[i] - max_lw) : 0.0;
  return pick_weighted(rng, w);
}

}  // namespace dvs
