#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace microclust {

struct NelderMeadOptions {
  std::size_t max_iter = 5000;
  // stop once max - min objective over the simplex falls below this
  double tolerance = 1e-10;
  // initial simplex: init plus `initial_step` along each axis
  double initial_step = 1.0;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double spread = 0.0;  // final objective spread over the simplex
};

using Objective = std::function<double(std::span<const double>)>;

// Downhill simplex minimization with the standard coefficients (reflection
// 1, expansion 2, contraction 0.5, shrink 0.5). Non-finite objective values
// are treated as +inf. Throws std::invalid_argument if the objective is not
// finite at `init`.
NelderMeadResult nelder_mead_minimize(const Objective &f, std::vector<double> init,
                                      const NelderMeadOptions &opts = {});

// Maximizes by minimizing -f; `value` in the result is the maximum.
NelderMeadResult nelder_mead_maximize(const Objective &f, std::vector<double> init,
                                      const NelderMeadOptions &opts = {});

} // namespace microclust
