#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "microclust/partition.hpp"

namespace microclust {

class Rng;

// Raised when a truncated series or iterative procedure does not converge.
class ConvergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// NegBin--NegBin partition model: K ~ NegBin(a, q) clusters with iid
// NegBin(r, p) sizes, labels uniformly permuted. Negative binomials follow
// the pmf x^{(k)}/k! (1 - s)^x s^k throughout.
struct NBNBParams {
  double a = 1.0;
  double q = 0.5;
  double r = 1.0;
  double p = 0.5;

  // log(q (1 - p)^r), always < 0 on the open domain
  double log_q_survival() const;
  // beta = q (1 - p)^r / (1 - q (1 - p)^r)
  double log_beta() const;
  double beta() const;
};

// Permuted Poisson sizes: K ~ Poisson(alpha), sizes iid Poisson(lambda).
struct PERPSParams {
  double alpha = 1.0;
  double lambda = 1.0;
};

struct DPParams {
  double theta = 1.0;
};

// Pitman-Yor with discount delta in [0, 1) and theta > -delta; delta = 0 is
// the Dirichlet process.
struct PYPParams {
  double theta = 1.0;
  double delta = 0.0;
};

// Prior on the number of mixture components K in {1, 2, ...}.
class KPrior {
public:
  enum class Kind { shifted_poisson, geometric, point_mass, custom };

  // K - 1 ~ Poisson(rate)
  static KPrior shifted_poisson(double rate);
  // P(K = k) = rho (1 - rho)^{k - 1}
  static KPrior geometric(double success_prob);
  static KPrior point_mass(std::uint64_t k);
  static KPrior custom(std::function<double(std::uint64_t)> log_pmf, std::string name);

  double log_pmf(std::uint64_t k) const;
  std::uint64_t sample(Rng &rng) const;

  Kind kind() const { return kind_; }
  double parameter() const { return param_; }
  // `poisson:1`, `geometric:6e-05`, `point:3`; custom priors print their name
  std::string to_string() const;
  static KPrior parse(std::string_view text);

private:
  Kind kind_ = Kind::geometric;
  double param_ = 0.0;
  std::function<double(std::uint64_t)> custom_;
  std::string name_;
};

// Default K prior for MFM: geometric with mean 1 / 6e-5, about 16,700
// components. See README for why this is not the light-tailed K - 1 ~
// Poisson(1).
inline constexpr double kDefaultMfmGeometricRate = 6e-5;

struct MFMParams {
  double gamma = 1.0;
  KPrior k_prior = KPrior::geometric(kDefaultMfmGeometricRate);
  // relative truncation tolerance for the V_n(t) series
  double tolerance = 1e-12;
};

inline constexpr std::uint64_t kMfmSeriesTermCap = 1'000'000;

enum class ModelKind { nbnb, perps, dp, pyp, mfm };

using ModelParams = std::variant<NBNBParams, PERPSParams, DPParams, PYPParams, MFMParams>;

ModelKind kind_of(const ModelParams &params);
std::string_view model_name(ModelKind kind);
// Throws std::invalid_argument for unknown names.
ModelKind parse_model_kind(std::string_view name);
inline const std::vector<ModelKind> &all_model_kinds() {
  static const std::vector<ModelKind> kinds{ModelKind::nbnb, ModelKind::perps, ModelKind::mfm,
                                            ModelKind::dp, ModelKind::pyp};
  return kinds;
}

// Domain checks; throw std::domain_error naming the offending parameter.
void validate(const NBNBParams &);
void validate(const PERPSParams &);
void validate(const DPParams &);
void validate(const PYPParams &);
void validate(const MFMParams &);
void validate(const ModelParams &);

// Joint probability of a partition of a random number of elements
double nbnb_log_prob_joint(const NBNBParams &params, const SizeProfile &profile);
double nbnb_log_prob_joint(const NBNBParams &params, const Partition &part);

// Same quantity by summing P(C | K) P(K) over K = |C| ... k_max. Throws
// ConvergenceError when the geometric tail bound beyond k_max exceeds 1e-12
// of the partial sum.
double nbnb_log_prob_bruteforce(const NBNBParams &params, const Partition &part, std::uint64_t k_max);

// log P(N = n) of the generative process, summed over the cluster count.
double nbnb_log_prob_size(const NBNBParams &params, std::uint64_t n);

// log a^{(|C|)} beta^{|C|} prod_c r^{(|c|)}: the law given N up to a constant.
double nbnb_log_weight_conditional(const NBNBParams &params, const SizeProfile &profile);
double nbnb_log_weight_conditional(const NBNBParams &params, const Partition &part);

double perps_log_prob_joint(const PERPSParams &params, const SizeProfile &profile);
double perps_log_prob_joint(const PERPSParams &params, const Partition &part);
double perps_log_prob_size(const PERPSParams &params, std::uint64_t n);
// |C| log(alpha e^{-lambda}): the law given N up to a constant.
double perps_log_weight_conditional(const PERPSParams &params, const SizeProfile &profile);

double dp_log_eppf(const DPParams &params, const SizeProfile &profile);
double dp_log_eppf(const DPParams &params, const Partition &part);
double pyp_log_eppf(const PYPParams &params, const SizeProfile &profile);
double pyp_log_eppf(const PYPParams &params, const Partition &part);

// log V_n(t) = log sum_{k >= t} k_(t) / (gamma k)^{(n)} p_K(k). The series is
// summed outward from its largest term until terms drop below
// tolerance * running sum (terms are assumed unimodal in k).
double mfm_log_v(const MFMParams &params, std::uint64_t n, std::uint64_t t);

// Memoized V_n(t) for one parameter set; safe to share between threads.
class MfmVSeries {
public:
  explicit MfmVSeries(MFMParams params);
  double log_v(std::uint64_t n, std::uint64_t t) const;
  const MFMParams &params() const { return params_; }

private:
  MFMParams params_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::uint64_t, std::uint64_t>, double> cache_;
};

double mfm_log_eppf(const MFMParams &params, const SizeProfile &profile);
double mfm_log_eppf(const MFMParams &params, const Partition &part);
double mfm_log_eppf(const MfmVSeries &series, const SizeProfile &profile);

// Objective maximized by the fitting code: joint probability for NBNB and
// PERPS, the partition law given N for DP, PYP and MFM.
double log_likelihood(const ModelParams &params, const SizeProfile &profile);

// Log of the partition law given N, up to an N-dependent constant for NBNB
// and PERPS and exactly normalized for DP, PYP and MFM. MFM V-series values
// are memoized across calls.
class ConditionalLaw {
public:
  explicit ConditionalLaw(ModelParams params);
  double log_weight(const SizeProfile &profile) const;
  double log_weight(const Partition &part) const { return log_weight(part.profile()); }
  // Normalized: NBNB and PERPS divide the joint probability by P(N).
  double log_prob(const SizeProfile &profile) const;
  double log_prob(const Partition &part) const { return log_prob(part.profile()); }
  const ModelParams &params() const { return params_; }

private:
  ModelParams params_;
  std::shared_ptr<const MfmVSeries> mfm_;
};

// Single-element reassignment rule of the conditional law: an element
// leaving the partition may join an existing cluster of size s with weight
// size_coef * s + offset, or open a new cluster with weight
// exp(log_new(K)) where K is the number of remaining clusters.
class ReseatRule {
public:
  ReseatRule(double size_coef, double offset, std::function<double(std::size_t)> log_new);

  double size_coef() const { return size_coef_; }
  double offset() const { return offset_; }
  double existing_weight(std::size_t size) const { return size_coef_ * static_cast<double>(size) + offset_; }
  double log_new_weight(std::size_t clusters_remaining) const { return log_new_(clusters_remaining); }

  // When the new-cluster weight is slope * k + intercept and both are
  // representable, samplers may skip the log-space evaluation.
  void set_linear_new_weight(double slope, double intercept);
  bool has_linear_new_weight() const { return linear_new_; }
  double linear_new_weight(std::size_t clusters_remaining) const {
    return new_slope_ * static_cast<double>(clusters_remaining) + new_intercept_;
  }

private:
  double size_coef_;
  double offset_;
  std::function<double(std::size_t)> log_new_;
  bool linear_new_ = false;
  double new_slope_ = 0.0;
  double new_intercept_ = 0.0;
};

// n is the total element count; only MFM depends on it.
ReseatRule make_reseat_rule(const ModelParams &params, std::size_t n);

struct ReseatWeights {
  std::vector<double> existing;  // one per remaining cluster, in input order
  double new_cluster = 0.0;
};

// Unnormalized destination weights for an element removed from a partition
// whose remaining cluster sizes are `remaining_sizes`.
ReseatWeights reseating_weights(const ReseatRule &rule, std::span<const std::size_t> remaining_sizes);

} // namespace microclust
