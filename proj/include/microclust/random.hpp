#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>

namespace microclust {

// splitmix64 finalizer; spreads consecutive replicate seeds over the engine's
// seed space.
std::uint64_t mix_seed(std::uint64_t seed);

// Random source for every sampler in the library. The engine is
// std::mt19937_64, whose output sequence is fixed by the standard; all
// variates below are derived from raw engine words in this file, so draws do
// not depend on the standard library's distribution implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  std::uint64_t next() { return engine_(); }

  // [0, 1) with 53 random bits
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // (0, 1)
  double uniform_open() { return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52; }

  // Uniform integer in [0, n), n > 0 (Lemire's multiply-and-reject).
  std::size_t uniform_index(std::size_t n);

  double normal();
  double gamma(double shape, double scale);
  std::uint64_t poisson(double mean);
  // pmf r^{(k)}/k! (1-p)^r p^k, mean r p / (1 - p)
  std::uint64_t negative_binomial(double r, double p);
  // Number of trials until the first success, support {1, 2, ...}.
  std::uint64_t geometric(double success_prob);

  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = uniform_index(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

} // namespace microclust
