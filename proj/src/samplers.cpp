#include "microclust/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace microclust {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Decides new-cluster vs existing-cluster given the summed existing weight
// (linear scale) and the log new-cluster weight.
bool draw_new_cluster(Rng &rng, double existing_total, double log_new) {
  if (existing_total <= 0.0)
    return true;
  if (log_new == kNegInf)
    return false;
  // P(new) = 1 / (1 + existing_total / exp(log_new))
  const double d = std::log(existing_total) - log_new;
  const double p_new = 1.0 / (1.0 + std::exp(d));
  return rng.uniform01() < p_new;
}

// Picks an existing cluster with probability proportional to
// coef * size + offset. `by_size` draws a cluster proportionally to its size
// (a uniformly chosen other element's cluster), `uniform` draws a cluster
// uniformly, `size_of` reports sizes.
template <class BySize, class Uniform, class SizeOf>
auto pick_existing(Rng &rng, double coef, double offset, std::size_t others, std::size_t clusters, BySize by_size,
                   Uniform uniform, SizeOf size_of) {
  if (offset >= 0.0) {
    const double w_size = coef * static_cast<double>(others);
    const double w_flat = offset * static_cast<double>(clusters);
    if (w_flat == 0.0 || (w_size > 0.0 && rng.uniform01() * (w_size + w_flat) < w_size))
      return by_size();
    return uniform();
  }
  // negative offset: size-proportional proposal, accept with prob
  // (coef s + offset) / (coef s) >= (coef + offset) / coef
  for (;;) {
    auto c = by_size();
    const double s = coef * static_cast<double>(size_of(c));
    if (rng.uniform01() * s < s + offset)
      return c;
  }
}

std::vector<std::uint32_t> expand_and_shuffle(const std::vector<std::uint64_t> &sizes, Rng &rng) {
  std::uint64_t total = 0;
  for (std::uint64_t s : sizes) {
    total += s;
    if (total > kMaxGenerativeElements)
      throw std::length_error("sample_generative: draw has more than " + std::to_string(kMaxGenerativeElements) +
                              " elements");
  }
  std::vector<std::uint32_t> labels;
  labels.reserve(total);
  for (std::size_t k = 0; k < sizes.size(); ++k)
    labels.insert(labels.end(), sizes[k], static_cast<std::uint32_t>(k + 1));
  rng.shuffle(labels.begin(), labels.end());
  return labels;
}

void check_latent_count(std::uint64_t k) {
  if (k > kMaxGenerativeElements)
    throw std::length_error("sample_generative: latent cluster count " + std::to_string(k) + " is too large");
}

} // namespace

// ---------------------------------------------------------------------------

GenerativeDraw sample_generative(const NBNBParams &params, Rng &rng) {
  validate(params);
  GenerativeDraw d;
  d.k = rng.negative_binomial(params.a, params.q);
  check_latent_count(d.k);
  d.sizes.resize(d.k);
  for (auto &s : d.sizes)
    s = rng.negative_binomial(params.r, params.p);
  d.partition = Partition::from_canonical_or_raw(expand_and_shuffle(d.sizes, rng));
  return d;
}

GenerativeDraw sample_generative(const PERPSParams &params, Rng &rng) {
  if (!(params.alpha > 0.0) || !std::isfinite(params.alpha))
    throw std::domain_error("perps: alpha must be positive");
  if (!(params.lambda >= 0.0) || !std::isfinite(params.lambda))
    throw std::domain_error("perps: lambda must be non-negative");
  if (params.alpha > static_cast<double>(kMaxGenerativeElements) ||
      params.alpha * params.lambda > static_cast<double>(kMaxGenerativeElements))
    throw std::length_error("sample_generative: expected draw size exceeds the element cap");
  GenerativeDraw d;
  d.k = rng.poisson(params.alpha);
  check_latent_count(d.k);
  d.sizes.resize(d.k);
  for (auto &s : d.sizes)
    s = rng.poisson(params.lambda);
  d.partition = Partition::from_canonical_or_raw(expand_and_shuffle(d.sizes, rng));
  return d;
}

// ---------------------------------------------------------------------------

ChaperoneDistribution ChaperoneDistribution::uniform(std::size_t n) {
  if (n < 2)
    throw std::invalid_argument("chaperones need at least two elements");
  ChaperoneDistribution d;
  d.n_ = n;
  d.draw_ = [n](Rng &rng) {
    const std::size_t i = rng.uniform_index(n);
    std::size_t j = rng.uniform_index(n - 1);
    if (j >= i)
      ++j;
    return std::make_pair(i, j);
  };
  return d;
}

ChaperoneDistribution ChaperoneDistribution::weighted(const std::vector<std::vector<double>> &weights) {
  const std::size_t n = weights.size();
  if (n < 2)
    throw std::invalid_argument("chaperones need at least two elements");
  std::vector<double> cumulative;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i].size() != n)
      throw std::invalid_argument("chaperone weights must form a square matrix");
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = weights[i][j];
      if (!(w > 0.0) || !std::isfinite(w) || weights[j][i] != w)
        throw std::invalid_argument("chaperone weights must be symmetric and strictly positive for every pair (" +
                                    std::to_string(i) + ", " + std::to_string(j) + ")");
      total += w;
      cumulative.push_back(total);
      pairs.emplace_back(i, j);
    }
  }
  ChaperoneDistribution d;
  d.n_ = n;
  d.draw_ = [cumulative = std::move(cumulative), pairs = std::move(pairs), total](Rng &rng) {
    const double u = rng.uniform01() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t idx = std::min<std::size_t>(it - cumulative.begin(), pairs.size() - 1);
    auto [i, j] = pairs[idx];
    return rng.uniform01() < 0.5 ? std::make_pair(i, j) : std::make_pair(j, i);
  };
  return d;
}

ChaperoneDistribution ChaperoneDistribution::custom(std::size_t n,
                                                    std::function<std::pair<std::size_t, std::size_t>(Rng &)> draw) {
  ChaperoneDistribution d;
  d.n_ = n;
  d.draw_ = std::move(draw);
  return d;
}

// ---------------------------------------------------------------------------

Partition initial_partition(ChainInit init, std::size_t n) {
  return init == ChainInit::all_in_one ? all_in_one(n) : all_singletons(n);
}

PartitionChain::PartitionChain(const ModelParams &model, const Partition &init, std::uint64_t seed,
                               LikelihoodOracle likelihood)
    : model_(model), rule_(make_reseat_rule(model, init.size())), state_(init), rng_(seed),
      likelihood_(std::move(likelihood)), seed_(seed) {}

void PartitionChain::sweep() {
  const std::size_t n = state_.size();
  for (std::size_t e = 0; e < n; ++e)
    reseat(e);
  ++sweeps_;
}

void PartitionChain::reseat(std::size_t element) {
  if (likelihood_ || explicit_weights_)
    reseat_explicit(element);
  else
    reseat_prior_only(element);
}

void PartitionChain::reseat_prior_only(std::size_t element) {
  state_.remove(element);
  const std::size_t k = state_.num_clusters();
  const std::size_t others = state_.size() - 1;
  const double coef = rule_.size_coef();
  const double offset = rule_.offset();
  const double existing_total = coef * static_cast<double>(others) + offset * static_cast<double>(k);

  if (k == 0) {
    state_.assign_new(element);
    return;
  }
  if (rule_.has_linear_new_weight() && offset >= 0.0) {
    // one uniform inverted over [new | by size | flat]; the position inside
    // the chosen band is itself uniform and picks the element or cluster
    const double w_new = rule_.linear_new_weight(k);
    const double w_size = coef * static_cast<double>(others);
    double u = rng_.uniform01() * (w_new + existing_total);
    if (u < w_new) {
      state_.assign_new(element);
      return;
    }
    u -= w_new;
    std::uint32_t slot;
    if (u < w_size) {
      std::size_t j = std::min(static_cast<std::size_t>(u / coef), others - 1);
      if (j >= element)
        ++j;
      slot = state_.cluster_of(j);
    } else {
      const auto idx = static_cast<std::size_t>((u - w_size) / offset);
      slot = state_.active_clusters()[std::min(idx, k - 1)];
    }
    state_.assign(element, slot);
    return;
  }
  if (draw_new_cluster(rng_, existing_total, rule_.log_new_weight(k))) {
    state_.assign_new(element);
    return;
  }
  const std::uint32_t slot = pick_existing(
      rng_, coef, offset, others, k,
      [&] {
        std::size_t j = rng_.uniform_index(others);
        if (j >= element)
          ++j;
        return state_.cluster_of(j);
      },
      [&] { return state_.active_clusters()[rng_.uniform_index(k)]; },
      [&](std::uint32_t c) { return state_.cluster_size(c); });
  state_.assign(element, slot);
}

double PartitionChain::cluster_loglik_delta(std::uint32_t slot, std::size_t element) {
  if (!likelihood_)
    return 0.0;
  const auto mem = state_.members(slot);
  scratch_members_.assign(mem.begin(), mem.end());
  const double before = likelihood_(scratch_members_);
  scratch_members_.push_back(static_cast<std::uint32_t>(element));
  return likelihood_(scratch_members_) - before;
}

std::size_t PartitionChain::draw_log_weights(std::span<const double> log_weights) {
  const double mx = *std::max_element(log_weights.begin(), log_weights.end());
  if (!(mx > kNegInf) || std::isnan(mx))
    throw std::runtime_error("reseating: every destination has zero weight");
  double total = 0.0;
  for (double lw : log_weights)
    total += std::exp(lw - mx);
  const double u = rng_.uniform01() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    cum += std::exp(log_weights[i] - mx);
    if (u < cum)
      return i;
  }
  // rounding left u at the very top; take the last positive-weight entry
  for (std::size_t i = log_weights.size(); i-- > 0;)
    if (log_weights[i] > kNegInf)
      return i;
  return log_weights.size() - 1;
}

void PartitionChain::reseat_explicit(std::size_t element) {
  state_.remove(element);
  const auto active = state_.active_clusters();
  const std::size_t k = active.size();
  scratch_slots_.assign(active.begin(), active.end());
  scratch_weights_.clear();
  for (std::uint32_t c : scratch_slots_)
    scratch_weights_.push_back(std::log(rule_.existing_weight(state_.cluster_size(c))) +
                               cluster_loglik_delta(c, element));
  double log_new = k == 0 ? 0.0 : rule_.log_new_weight(k);
  if (likelihood_) {
    const std::uint32_t single = static_cast<std::uint32_t>(element);
    log_new += likelihood_(std::span<const std::uint32_t>(&single, 1));
  }
  scratch_weights_.push_back(log_new);

  const std::size_t pick = draw_log_weights(scratch_weights_);
  if (pick == k)
    state_.assign_new(element);
  else
    state_.assign(element, scratch_slots_[pick]);
}

void PartitionChain::chaperones_step(const ChaperoneDistribution &chaperones) {
  const std::size_t n = state_.size();
  const auto [ci, cj] = chaperones.sample(rng_);
  if (ci == cj)
    throw std::logic_error("chaperone distribution returned the same element twice (" + std::to_string(ci) + ")");
  if (ci >= n || cj >= n)
    throw std::out_of_range("chaperone index outside the element range");

  const std::uint32_t slot_i = state_.cluster_of(ci);
  const std::uint32_t slot_j = state_.cluster_of(cj);
  std::vector<std::uint32_t> affected(state_.members(slot_i).begin(), state_.members(slot_i).end());
  if (slot_j != slot_i)
    affected.insert(affected.end(), state_.members(slot_j).begin(), state_.members(slot_j).end());
  rng_.shuffle(affected.begin(), affected.end());

  double log_w[2];
  for (std::uint32_t e : affected) {
    const std::uint32_t before = state_.cluster_of(e);
    state_.remove(e);

    if (e != ci && e != cj) {
      // a child: stays with one of the chaperones
      const std::uint32_t a = state_.cluster_of(ci);
      const std::uint32_t b = state_.cluster_of(cj);
      if (a == b) {
        state_.assign(e, a);
        continue;
      }
      log_w[0] = std::log(rule_.existing_weight(state_.cluster_size(a))) + cluster_loglik_delta(a, e);
      log_w[1] = std::log(rule_.existing_weight(state_.cluster_size(b))) + cluster_loglik_delta(b, e);
      state_.assign(e, draw_log_weights(log_w) == 0 ? a : b);
      continue;
    }

    const std::size_t other = e == ci ? cj : ci;
    const std::uint32_t other_slot = state_.cluster_of(other);
    if (state_.cluster_size(before) > 0 && before != other_slot) {
      // leaving would abandon children
      state_.assign(e, before);
      continue;
    }
    // either alone (split) or joining the other chaperone (merge)
    log_w[0] = std::log(rule_.existing_weight(state_.cluster_size(other_slot))) + cluster_loglik_delta(other_slot, e);
    log_w[1] = rule_.log_new_weight(state_.num_clusters());
    if (likelihood_)
      log_w[1] += likelihood_(std::span<const std::uint32_t>(&e, 1));
    if (draw_log_weights(log_w) == 0)
      state_.assign(e, other_slot);
    else
      state_.assign_new(e);
  }
  ++steps_;
}

Partition sample_conditional(const ModelParams &model, std::size_t n, std::size_t sweeps, std::uint64_t seed,
                             ChainInit init, const SweepTrace &trace) {
  PartitionChain chain(model, initial_partition(init, n), seed);
  for (std::size_t s = 0; s < sweeps; ++s) {
    chain.sweep();
    if (trace)
      trace(s + 1, chain.state());
  }
  return chain.partition();
}

// ---------------------------------------------------------------------------

namespace {

// Seats n customers one at a time. Existing table weight coef * size +
// offset, new table weight exp(log_new(customers_seated, tables)).
template <class LogNew>
Partition seat_sequentially(std::size_t n, double coef, double offset, LogNew log_new, Rng &rng) {
  std::vector<std::uint32_t> labels;
  labels.reserve(n);
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = sizes.size();
    const double existing_total = coef * static_cast<double>(i) + offset * static_cast<double>(t);
    if (t == 0 || draw_new_cluster(rng, existing_total, log_new(i, t))) {
      sizes.push_back(1);
      labels.push_back(static_cast<std::uint32_t>(t));
      continue;
    }
    const std::uint32_t c = pick_existing(
        rng, coef, offset, i, t, [&] { return labels[rng.uniform_index(i)]; },
        [&] { return static_cast<std::uint32_t>(rng.uniform_index(t)); }, [&](std::uint32_t c) { return sizes[c]; });
    ++sizes[c];
    labels.push_back(c);
  }
  return Partition::from_canonical_or_raw(std::move(labels));
}

} // namespace

Partition sequential_sample_exchangeable(const ModelParams &params, std::size_t n, Rng &rng, MfmSampling mfm_method) {
  validate(params);
  if (n == 0)
    throw std::invalid_argument("sequential_sample_exchangeable: n must be at least 1");

  if (const auto *dp = std::get_if<DPParams>(&params)) {
    const double log_theta = std::log(dp->theta);
    return seat_sequentially(n, 1.0, 0.0, [=](std::size_t, std::size_t) { return log_theta; }, rng);
  }
  if (const auto *py = std::get_if<PYPParams>(&params)) {
    const double theta = py->theta, delta = py->delta;
    return seat_sequentially(
        n, 1.0, -delta, [=](std::size_t, std::size_t t) { return std::log(theta + static_cast<double>(t) * delta); },
        rng);
  }
  if (const auto *mfm = std::get_if<MFMParams>(&params)) {
    const double gamma = mfm->gamma;
    if (mfm_method == MfmSampling::latent_k) {
      const std::uint64_t k = mfm->k_prior.sample(rng);
      return seat_sequentially(
          n, 1.0, gamma,
          [=](std::size_t, std::size_t t) {
            return t < k ? std::log(gamma * static_cast<double>(k - t)) : kNegInf;
          },
          rng);
    }
    const MfmVSeries series(*mfm);
    const double log_gamma = std::log(gamma);
    return seat_sequentially(
        n, 1.0, gamma,
        [&](std::size_t seated, std::size_t t) {
          const std::uint64_t m = seated + 1;
          return log_gamma + series.log_v(m, t + 1) - series.log_v(m, t);
        },
        rng);
  }
  throw std::invalid_argument("sequential_sample_exchangeable: only DP, PYP and MFM have sequential samplers");
}

} // namespace microclust
