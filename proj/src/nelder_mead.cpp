#include "microclust/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace microclust {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective &f, std::span<const double> x) {
  const double v = f(x);
  return std::isfinite(v) ? v : kInf;
}

} // namespace

NelderMeadResult nelder_mead_minimize(const Objective &f, std::vector<double> init, const NelderMeadOptions &opts) {
  const std::size_t dim = init.size();
  if (dim == 0)
    throw std::invalid_argument("nelder_mead: empty parameter vector");
  if (!std::isfinite(f(init)))
    throw std::invalid_argument("nelder_mead: objective is not finite at the initial point");

  constexpr double reflect = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;

  std::vector<std::vector<double>> simplex(dim + 1, init);
  for (std::size_t i = 0; i < dim; ++i)
    simplex[i + 1][i] += opts.initial_step;
  std::vector<double> values(dim + 1);
  for (std::size_t i = 0; i <= dim; ++i)
    values[i] = safe_eval(f, simplex[i]);

  std::vector<std::size_t> order(dim + 1);
  std::vector<double> centroid(dim), trial(dim), trial2(dim);
  auto point = [&](double t, std::vector<double> &out) {
    // centroid + t * (centroid - worst)
    const auto &worst = simplex[order[dim]];
    for (std::size_t k = 0; k < dim; ++k)
      out[k] = centroid[k] + t * (centroid[k] - worst[k]);
  };

  NelderMeadResult res;
  std::size_t iter = 0;
  for (;; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const double best = values[order[0]];
    const double worst = values[order[dim]];
    res.spread = worst - best;
    if (std::isfinite(worst) && res.spread < opts.tolerance) {
      res.converged = true;
      break;
    }
    if (iter >= opts.max_iter)
      break;
    // a simplex collapsed to a point cannot make progress
    double diameter = 0.0;
    for (std::size_t i = 1; i <= dim; ++i)
      for (std::size_t k = 0; k < dim; ++k)
        diameter = std::max(diameter, std::abs(simplex[order[i]][k] - simplex[order[0]][k]));
    if (diameter == 0.0)
      break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t k = 0; k < dim; ++k)
        centroid[k] += simplex[order[i]][k] / static_cast<double>(dim);

    const double second_worst = values[order[dim - 1]];
    point(reflect, trial);
    const double f_r = safe_eval(f, trial);

    if (f_r < best) {
      point(expand, trial2);
      const double f_e = safe_eval(f, trial2);
      if (f_e < f_r) {
        simplex[order[dim]] = trial2;
        values[order[dim]] = f_e;
      } else {
        simplex[order[dim]] = trial;
        values[order[dim]] = f_r;
      }
      continue;
    }
    if (f_r < second_worst) {
      simplex[order[dim]] = trial;
      values[order[dim]] = f_r;
      continue;
    }
    if (f_r < worst) {
      // outside contraction
      point(contract, trial2);
      const double f_c = safe_eval(f, trial2);
      if (f_c <= f_r) {
        simplex[order[dim]] = trial2;
        values[order[dim]] = f_c;
        continue;
      }
    } else {
      // inside contraction
      point(-contract, trial2);
      const double f_c = safe_eval(f, trial2);
      if (f_c < worst) {
        simplex[order[dim]] = trial2;
        values[order[dim]] = f_c;
        continue;
      }
    }
    // shrink towards the best vertex
    const auto &b = simplex[order[0]];
    for (std::size_t i = 1; i <= dim; ++i) {
      auto &v = simplex[order[i]];
      for (std::size_t k = 0; k < dim; ++k)
        v[k] = b[k] + shrink * (v[k] - b[k]);
      values[order[i]] = safe_eval(f, v);
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  res.x = simplex[static_cast<std::size_t>(best_it - values.begin())];
  res.value = *best_it;
  res.iterations = iter;
  return res;
}

NelderMeadResult nelder_mead_maximize(const Objective &f, std::vector<double> init, const NelderMeadOptions &opts) {
  auto neg = [&f](std::span<const double> x) { return -f(x); };
  NelderMeadResult r = nelder_mead_minimize(neg, std::move(init), opts);
  r.value = -r.value;
  return r;
}

} // namespace microclust
