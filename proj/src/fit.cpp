#include "microclust/fit.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace microclust {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logit(double x) { return std::log(x) - std::log1p(-x); }
double logistic(double u) { return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

double radical_inverse(std::size_t index, unsigned base) {
  double result = 0.0, f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

struct Box {
  double lo, hi;
};

// start-point boxes in unconstrained coordinates
std::vector<Box> start_box(ModelKind kind) {
  switch (kind) {
  case ModelKind::nbnb:
    return {{-2.0, 7.0}, {-3.0, 10.0}, {-10.0, 7.0}, {-8.0, 3.0}};
  case ModelKind::perps:
    return {{-2.0, 12.0}, {-6.0, 3.0}};
  case ModelKind::dp:
    return {{-5.0, 12.0}};
  case ModelKind::pyp:
    return {{-6.0, 3.0}, {-5.0, 12.0}};
  case ModelKind::mfm:
    return {{-4.0, 3.0}};
  }
  return {};
}

std::vector<double> halton_point(ModelKind kind, std::size_t restart) {
  static constexpr std::array<unsigned, 4> bases{2, 3, 5, 7};
  const auto box = start_box(kind);
  const std::size_t index = restart + 1 + 37 * static_cast<std::size_t>(kind);
  std::vector<double> x(box.size());
  for (std::size_t d = 0; d < box.size(); ++d)
    x[d] = box[d].lo + (box[d].hi - box[d].lo) * radical_inverse(index, bases[d]);
  return x;
}

FitResult fit_unconstrained(ModelKind kind, const SizeProfile &observed, const FitOptions &opts) {
  auto objective = [&](std::span<const double> x) {
    try {
      return log_likelihood(from_unconstrained(kind, x, opts.mfm_k_prior), observed);
    } catch (const std::exception &) {
      // domain edge (rounded to 0 or 1) or a series that failed to converge
      return kNegInf;
    }
  };

  bool found = false;
  FitResult best;
  std::vector<double> best_x;
  for (std::size_t s = 0; s < opts.restarts; ++s) {
    std::vector<double> x0 = halton_point(kind, s);
    if (!std::isfinite(objective(x0)))
      continue;
    NelderMeadResult r = nelder_mead_maximize(objective, x0, opts.nelder_mead);
    std::size_t iterations = r.iterations;
    for (std::size_t round = 0; round < opts.polish_rounds; ++round) {
      NelderMeadResult again = nelder_mead_maximize(objective, r.x, opts.nelder_mead);
      iterations += again.iterations;
      const bool improved = again.value > r.value + 1e-12;
      if (again.value >= r.value)
        r = std::move(again);
      if (!improved)
        break;
    }
    if (!found || r.value > best.log_lik) {
      found = true;
      best.log_lik = r.value;
      best.iterations = iterations;
      best.converged = r.converged;
      best.simplex_spread = r.spread;
      best_x = r.x;
    }
  }
  if (!found)
    throw std::runtime_error("fit_mle(" + std::string(model_name(kind)) +
                             "): objective is not finite at any start point");
  best.params = from_unconstrained(kind, best_x, opts.mfm_k_prior);
  best.log_lik = log_likelihood(best.params, observed);
  return best;
}

} // namespace

std::size_t unconstrained_dim(ModelKind kind) { return start_box(kind).size(); }

std::vector<double> to_unconstrained(const ModelParams &params) {
  validate(params);
  return std::visit(
      [](const auto &m) -> std::vector<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NBNBParams>)
          return {std::log(m.a), logit(m.q), std::log(m.r), logit(m.p)};
        else if constexpr (std::is_same_v<T, PERPSParams>)
          return {std::log(m.alpha), std::log(m.lambda)};
        else if constexpr (std::is_same_v<T, DPParams>)
          return {std::log(m.theta)};
        else if constexpr (std::is_same_v<T, PYPParams>)
          return {m.delta > 0.0 ? logit(m.delta) : -745.0, std::log(m.theta + m.delta)};
        else
          return {std::log(m.gamma)};
      },
      params);
}

ModelParams from_unconstrained(ModelKind kind, std::span<const double> x, const KPrior &mfm_k_prior) {
  if (x.size() != unconstrained_dim(kind))
    throw std::invalid_argument("from_unconstrained: wrong coordinate count");
  switch (kind) {
  case ModelKind::nbnb:
    return NBNBParams{std::exp(x[0]), logistic(x[1]), std::exp(x[2]), logistic(x[3])};
  case ModelKind::perps:
    return PERPSParams{std::exp(x[0]), std::exp(x[1])};
  case ModelKind::dp:
    return DPParams{std::exp(x[0])};
  case ModelKind::pyp: {
    const double delta = logistic(x[0]);
    return PYPParams{std::exp(x[1]) - delta, delta};
  }
  case ModelKind::mfm: {
    MFMParams m;
    m.gamma = std::exp(x[0]);
    m.k_prior = mfm_k_prior;
    return m;
  }
  }
  throw std::invalid_argument("from_unconstrained: unknown model");
}

FitResult fit_mle(ModelKind kind, const SizeProfile &observed, const FitOptions &opts) {
  if (observed.n == 0)
    throw std::invalid_argument("fit_mle: the observed partition is empty");
  if (kind != ModelKind::pyp)
    return fit_unconstrained(kind, observed, opts);

  // delta = 0 boundary: the DP profile
  FitResult interior = fit_unconstrained(ModelKind::pyp, observed, opts);
  FitResult boundary = fit_unconstrained(ModelKind::dp, observed, opts);
  if (boundary.log_lik >= interior.log_lik) {
    boundary.params = PYPParams{std::get<DPParams>(boundary.params).theta, 0.0};
    boundary.log_lik = log_likelihood(boundary.params, observed);
    return boundary;
  }
  return interior;
}

FitResult fit_mle(ModelKind kind, const Partition &observed, const FitOptions &opts) {
  return fit_mle(kind, observed.profile(), opts);
}

PERPSParams perps_mle_closed_form(const SizeProfile &observed) {
  const auto n = static_cast<double>(observed.n);
  const auto k = static_cast<double>(observed.num_parts);
  if (observed.num_parts < 1 || observed.num_parts >= observed.n)
    throw std::domain_error("perps_mle_closed_form: needs 1 <= |C| < N; the all-singleton partition has "
                            "its supremum at lambda -> 0");
  auto g = [&](double lambda) { return n * -std::expm1(-lambda) - k * lambda; };
  double lo = 1e-12, hi = 50.0;
  if (g(hi) > 0.0)
    throw std::domain_error("perps_mle_closed_form: root lies beyond lambda = 50");
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  return PERPSParams{k / -std::expm1(-lambda), lambda};
}

PERPSParams perps_mle_closed_form(const Partition &observed) { return perps_mle_closed_form(observed.profile()); }

} // namespace microclust
