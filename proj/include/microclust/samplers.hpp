#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "microclust/cluster_state.hpp"
#include "microclust/models.hpp"
#include "microclust/partition.hpp"
#include "microclust/random.hpp"

namespace microclust {

// ---------------------------------------------------------------------------
// Forward sampling of the NBNB / PERPS generative process.

struct GenerativeDraw {
  std::uint64_t k = 0;               // latent cluster count, empty clusters included
  std::vector<std::uint64_t> sizes;  // N_1 ... N_K
  Partition partition;               // induced partition of N = sum of sizes
};

// Draws whose total exceeds this many elements are refused with
// std::length_error rather than materialized.
inline constexpr std::uint64_t kMaxGenerativeElements = 100'000'000;

GenerativeDraw sample_generative(const NBNBParams &params, Rng &rng);
// lambda = 0 is accepted here (every cluster is empty, N = 0).
GenerativeDraw sample_generative(const PERPSParams &params, Rng &rng);

// ---------------------------------------------------------------------------
// MCMC on the partition law given N.

// Log marginal likelihood of the data points in a cluster, given its member
// indices. An empty oracle means prior-only sampling.
using LikelihoodOracle = std::function<double(std::span<const std::uint32_t> members)>;

// State-independent distribution over chaperone pairs (i, j), i != j.
class ChaperoneDistribution {
public:
  static ChaperoneDistribution uniform(std::size_t n);
  // Symmetric weights w[i][j] over pairs; every off-diagonal weight must be
  // strictly positive or construction fails with std::invalid_argument.
  static ChaperoneDistribution weighted(const std::vector<std::vector<double>> &weights);
  // Caller-supplied rule; positivity cannot be checked here.
  static ChaperoneDistribution custom(std::size_t n, std::function<std::pair<std::size_t, std::size_t>(Rng &)> draw);

  std::pair<std::size_t, std::size_t> sample(Rng &rng) const { return draw_(rng); }
  std::size_t size() const { return n_; }

private:
  std::size_t n_ = 0;
  std::function<std::pair<std::size_t, std::size_t>(Rng &)> draw_;
};

enum class ChainInit { all_in_one, all_singletons };

Partition initial_partition(ChainInit init, std::size_t n);

// A Markov chain over partitions of a fixed element set. Owns its state and
// random stream; chains never share mutable state.
class PartitionChain {
public:
  PartitionChain(const ModelParams &model, const Partition &init, std::uint64_t seed,
                 LikelihoodOracle likelihood = {});

  // One reseating sweep: elements 0..n-1 in order, each removed and
  // reassigned from its full conditional.
  void sweep();

  // Chooses chaperones (i, j) and Gibbs-reassigns every element of
  // c_i u c_j in shuffled order, keeping c_i u c_j closed and every
  // non-chaperone clustered with a chaperone. Throws std::logic_error if the
  // distribution yields i == j.
  void chaperones_step(const ChaperoneDistribution &chaperones);

  Partition partition() const { return state_.to_partition(); }
  const ClusterState &state() const { return state_; }
  const ModelParams &model() const { return model_; }
  std::size_t sweep_count() const { return sweeps_; }
  std::size_t step_count() const { return steps_; }
  std::uint64_t seed() const { return seed_; }

  // Forces the explicit per-destination weight computation even when the
  // prior-only shortcut applies (the two are equal in distribution).
  void use_explicit_weights(bool on) { explicit_weights_ = on; }

private:
  void reseat(std::size_t element);
  void reseat_prior_only(std::size_t element);
  void reseat_explicit(std::size_t element);
  std::size_t draw_log_weights(std::span<const double> log_weights);
  double cluster_loglik_delta(std::uint32_t slot, std::size_t element);

  ModelParams model_;
  ReseatRule rule_;
  ClusterState state_;
  Rng rng_;
  LikelihoodOracle likelihood_;
  std::uint64_t seed_;
  std::size_t sweeps_ = 0;
  std::size_t steps_ = 0;
  bool explicit_weights_ = false;
  std::vector<double> scratch_weights_;
  std::vector<std::uint32_t> scratch_slots_;
  std::vector<std::uint32_t> scratch_members_;
};

// Per-sweep observer: (sweep index, 1-based, and current state).
using SweepTrace = std::function<void(std::size_t, const ClusterState &)>;

// Runs a reseating chain for `sweeps` sweeps from `init` and returns the
// final partition: one approximate draw from the law given N.
Partition sample_conditional(const ModelParams &model, std::size_t n, std::size_t sweeps, std::uint64_t seed,
                             ChainInit init = ChainInit::all_in_one, const SweepTrace &trace = {});

// ---------------------------------------------------------------------------
// Exact sequential sampling of the exchangeable baselines.

enum class MfmSampling {
  latent_k,  // draw K from its prior, then a K-colour Polya urn
  v_ratio,   // restaurant process with new-table weight gamma V_m(t+1)/V_m(t)
};

// DP, PYP or MFM parameters; NBNB/PERPS are rejected with
// std::invalid_argument.
Partition sequential_sample_exchangeable(const ModelParams &params, std::size_t n, Rng &rng,
                                         MfmSampling mfm_method = MfmSampling::latent_k);

} // namespace microclust
