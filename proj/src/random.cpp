#include "microclust/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace microclust {

namespace {

// Largest Poisson mean we are willing to draw from; keeps counts well inside
// 64 bits and the PTRS constants accurate.
constexpr double kMaxPoissonMean = 1e15;

std::uint64_t poisson_small(Rng &rng, double mean) {
  // multiplication method
  const double limit = std::exp(-mean);
  std::uint64_t k = 0;
  double prod = rng.uniform01();
  while (prod > limit) {
    ++k;
    prod *= rng.uniform01();
  }
  return k;
}

// Hormann's transformed rejection with squeeze (PTRS), mean >= 10.
std::uint64_t poisson_ptrs(Rng &rng, double mean) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform01() - 0.5;
    const double v = rng.uniform01();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr)
      return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us))
      continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0))
      return static_cast<std::uint64_t>(k);
  }
}

} // namespace

std::uint64_t mix_seed(std::uint64_t seed) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t Rng::uniform_index(std::size_t n) {
  std::uint64_t x = engine_();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
    while (low < threshold) {
      x = engine_();
      m = static_cast<unsigned __int128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

double Rng::normal() {
  // Box-Muller, one variate per call
  const double u1 = uniform_open();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw std::domain_error("gamma: shape and scale must be positive");
  if (shape < 1.0) {
    // boost to shape + 1, then scale by U^{1/shape}
    const double g = gamma(shape + 1.0, 1.0);
    return scale * g * std::exp(std::log(uniform_open()) / shape);
  }
  // Marsaglia and Tsang
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x)
      return scale * d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return scale * d * v;
  }
}

std::uint64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0) || mean > kMaxPoissonMean)
    throw std::domain_error("poisson: mean out of range");
  if (mean == 0.0)
    return 0;
  return mean < 10.0 ? poisson_small(*this, mean) : poisson_ptrs(*this, mean);
}

std::uint64_t Rng::negative_binomial(double r, double p) {
  if (!(r > 0.0) || !(p > 0.0 && p < 1.0))
    throw std::domain_error("negative_binomial: need r > 0 and p in (0, 1)");
  // gamma-Poisson mixture
  return poisson(gamma(r, p / (1.0 - p)));
}

std::uint64_t Rng::geometric(double success_prob) {
  if (!(success_prob > 0.0 && success_prob <= 1.0))
    throw std::domain_error("geometric: success probability must be in (0, 1]");
  if (success_prob == 1.0)
    return 1;
  const double k = std::floor(std::log(uniform_open()) / std::log1p(-success_prob));
  if (k >= static_cast<double>(std::numeric_limits<std::uint64_t>::max() / 2))
    throw std::overflow_error("geometric: draw overflows");
  return 1 + static_cast<std::uint64_t>(k);
}

} // namespace microclust
