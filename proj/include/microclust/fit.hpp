#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "microclust/models.hpp"
#include "microclust/nelder_mead.hpp"
#include "microclust/partition.hpp"

namespace microclust {

struct FitResult {
  ModelParams params;
  double log_lik = 0.0;
  std::size_t iterations = 0;  // summed over every simplex run of the winning start
  bool converged = false;
  double simplex_spread = 0.0;
};

struct FitOptions {
  std::size_t restarts = 20;
  // extra simplex runs restarted from the incumbent optimum
  std::size_t polish_rounds = 4;
  NelderMeadOptions nelder_mead{};
  // K prior used when fitting MFM; only gamma is estimated
  KPrior mfm_k_prior = KPrior::geometric(kDefaultMfmGeometricRate);
};

// Bijections between each model's constrained parameters and the
// optimizer's unconstrained coordinates:
//   nbnb  (log a, logit q, log r, logit p)
//   perps (log alpha, log lambda)
//   dp    (log theta)
//   pyp   (logit delta, log(theta + delta))
//   mfm   (log gamma)
std::size_t unconstrained_dim(ModelKind kind);
std::vector<double> to_unconstrained(const ModelParams &params);
ModelParams from_unconstrained(ModelKind kind, std::span<const double> x,
                               const KPrior &mfm_k_prior = KPrior::geometric(kDefaultMfmGeometricRate));

// Multi-start Nelder-Mead maximization of log_likelihood(). Start points
// are a Halton sequence over a per-model box in unconstrained space, offset
// by model kind; the best start wins, ties to the lowest start index. PYP
// also profiles the delta = 0 boundary and returns it when at least as good.
// Throws std::runtime_error when no start has a finite objective.
FitResult fit_mle(ModelKind kind, const SizeProfile &observed, const FitOptions &opts = {});
FitResult fit_mle(ModelKind kind, const Partition &observed, const FitOptions &opts = {});

// Solves N (1 - e^{-lambda}) = |C| lambda by bisection and sets
// alpha = |C| / (1 - e^{-lambda}). Requires 1 <= |C| < N; the all-singleton
// partition has its supremum at lambda -> 0 and raises std::domain_error.
PERPSParams perps_mle_closed_form(const SizeProfile &observed);
PERPSParams perps_mle_closed_form(const Partition &observed);

} // namespace microclust
