#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "microclust/combinatorics.hpp"
#include "microclust/enumerate.hpp"
#include "microclust/models.hpp"
#include "microclust/params_io.hpp"
#include "microclust/random.hpp"
#include "microclust/samplers.hpp"
#include "oracles.hpp"

using namespace microclust;

namespace {

using Labels = std::vector<std::uint32_t>;

Labels labels_of(const Partition &p) { return Labels(p.labels().begin(), p.labels().end()); }

struct Exact {
  std::map<Labels, std::size_t> index;
  std::vector<double> prob;
};

// target probabilities by enumeration; `extra` adds a log factor per partition
template <class Extra>
Exact exact_law(const ModelParams &model, std::size_t n, Extra extra) {
  Exact e;
  const ConditionalLaw law(model);
  std::vector<double> logw;
  for_each_partition(n, [&](const Partition &p) {
    e.index[labels_of(p)] = logw.size();
    logw.push_back(law.log_prob(p) + extra(p));
  });
  const double z = log_sum_exp(logw);
  for (double lw : logw)
    e.prob.push_back(std::exp(lw - z));
  return e;
}

Exact exact_law(const ModelParams &model, std::size_t n) {
  return exact_law(model, n, [](const Partition &) { return 0.0; });
}

template <class Step>
std::vector<double> chain_frequencies(const Exact &e, PartitionChain &chain, std::size_t samples, Step step) {
  std::vector<double> freq(e.prob.size(), 0.0);
  for (int i = 0; i < 100; ++i)
    step(chain);
  for (std::size_t s = 0; s < samples; ++s) {
    step(chain);
    freq[e.index.at(labels_of(chain.partition()))] += 1.0;
  }
  for (double &f : freq)
    f /= static_cast<double>(samples);
  return freq;
}

} // namespace

TEST_CASE("Rng is deterministic per seed") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs |= x != c.next();
  }
  CHECK(differs);
}

TEST_CASE("uniform variates") {
  Rng rng(1);
  double sum = 0.0;
  std::vector<int> counts(7, 0);
  const int draws = 700000;
  for (int i = 0; i < draws; ++i) {
    const double u = rng.uniform01();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    sum += u;
    ++counts[rng.uniform_index(7)];
  }
  CHECK(sum / draws == doctest::Approx(0.5).epsilon(0.005));
  double chi2 = 0.0;
  for (int c : counts)
    chi2 += (c - draws / 7.0) * (c - draws / 7.0) / (draws / 7.0);
  // 6 degrees of freedom, 0.999 quantile 22.46
  CHECK(chi2 < 22.46);
}

TEST_CASE("continuous and count variates have the right moments") {
  Rng rng(2);
  const int draws = 400000;
  auto moments = [&](auto draw) {
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double x = static_cast<double>(draw());
      s += x;
      s2 += x * x;
    }
    const double mean = s / draws;
    return std::pair{mean, s2 / draws - mean * mean};
  };
  auto [nm, nv] = moments([&] { return rng.normal(); });
  CHECK(std::abs(nm) < 0.01);
  CHECK(nv == doctest::Approx(1.0).epsilon(0.01));
  for (double shape : {0.3, 1.0, 4.5}) {
    auto [m, v] = moments([&] { return rng.gamma(shape, 2.0); });
    CHECK(m == doctest::Approx(2.0 * shape).epsilon(0.01));
    CHECK(v == doctest::Approx(4.0 * shape).epsilon(0.03));
  }
  for (double mean : {0.4, 3.0, 9.9, 10.0, 250.0}) {
    auto [m, v] = moments([&] { return rng.poisson(mean); });
    CHECK(m == doctest::Approx(mean).epsilon(0.01));
    CHECK(v == doctest::Approx(mean).epsilon(0.03));
  }
  {
    // mean r p / (1 - p), variance mean / (1 - p)
    auto [m, v] = moments([&] { return rng.negative_binomial(6.0, 1.0 / 3.0); });
    CHECK(m == doctest::Approx(3.0).epsilon(0.01));
    CHECK(v == doctest::Approx(4.5).epsilon(0.03));
  }
  {
    auto [m, v] = moments([&] { return rng.geometric(0.2); });
    CHECK(m == doctest::Approx(5.0).epsilon(0.01));
    CHECK(v == doctest::Approx(20.0).epsilon(0.03));
  }
  CHECK(rng.geometric(1.0) == 1);
}

TEST_CASE("shuffle is a uniform permutation") {
  Rng rng(9);
  std::map<std::vector<int>, int> seen;
  for (int i = 0; i < 60000; ++i) {
    std::vector<int> v{0, 1, 2};
    rng.shuffle(v.begin(), v.end());
    ++seen[v];
  }
  CHECK(seen.size() == 6);
  for (auto &[perm, c] : seen)
    CHECK(c / 60000.0 == doctest::Approx(1.0 / 6.0).epsilon(0.05));
}

TEST_CASE("generative draws conditioned on N = 3 follow the conditional law") {
  const NBNBParams m{1.0, 0.9, 6.0, 1.0 / 3.0};
  const Exact e = exact_law(m, 3);
  std::vector<double> freq(e.prob.size(), 0.0);
  Rng rng(17);
  std::size_t kept = 0;
  while (kept < 100000) {
    const GenerativeDraw d = sample_generative(m, rng);
    if (d.partition.size() != 3)
      continue;
    ++freq[e.index.at(labels_of(d.partition))];
    ++kept;
  }
  for (double &f : freq)
    f /= static_cast<double>(kept);
  CHECK(oracle::total_variation(freq, e.prob) < 0.02);
}

TEST_CASE("PERPS generative edge cases") {
  Rng rng(3);
  CHECK(sample_generative(PERPSParams{4.0, 0.0}, rng).partition.size() == 0);
  CHECK_THROWS_AS(sample_generative(PERPSParams{1e12, 1.0}, rng), std::length_error);
}

TEST_CASE("reseating chain targets the conditional law") {
  const std::vector<ModelParams> models{NBNBParams{1.0, 0.9, 6.0, 1.0 / 3.0}, PERPSParams{3.0, 0.6}, DPParams{1.5},
                                        PYPParams{0.5, 0.4}, MFMParams{1.0, KPrior::shifted_poisson(1.0)}};
  for (const auto &model : models) {
    for (bool explicit_weights : {false, true}) {
      CAPTURE(format_params(model));
      CAPTURE(explicit_weights);
      const Exact e = exact_law(model, 4);
      PartitionChain chain(model, all_in_one(4), 101);
      chain.use_explicit_weights(explicit_weights);
      const auto freq = chain_frequencies(e, chain, 60000, [](PartitionChain &c) { c.sweep(); });
      CHECK(oracle::total_variation(freq, e.prob) < 0.02);
    }
  }
}

TEST_CASE("chaperones chain targets the conditional law") {
  const std::vector<ModelParams> models{NBNBParams{1.0, 0.9, 6.0, 1.0 / 3.0}, DPParams{0.8}, PYPParams{1.0, 0.3}};
  for (const auto &model : models) {
    CAPTURE(format_params(model));
    const Exact e = exact_law(model, 4);
    PartitionChain chain(model, all_singletons(4), 7);
    const auto pairs = ChaperoneDistribution::uniform(4);
    const auto freq = chain_frequencies(e, chain, 120000, [&](PartitionChain &c) { c.chaperones_step(pairs); });
    CHECK(oracle::total_variation(freq, e.prob) < 0.02);
  }
}

TEST_CASE("a likelihood oracle tilts the chain") {
  // clusters pay 0.7 per member beyond the first
  const LikelihoodOracle lik = [](std::span<const std::uint32_t> mem) {
    return -0.7 * static_cast<double>(mem.size() - 1);
  };
  const ModelParams model = DPParams{2.0};
  const Exact e = exact_law(model, 4, [](const Partition &p) {
    return -0.7 * static_cast<double>(p.size() - p.num_parts());
  });
  {
    PartitionChain chain(model, all_in_one(4), 5, lik);
    const auto freq = chain_frequencies(e, chain, 60000, [](PartitionChain &c) { c.sweep(); });
    CHECK(oracle::total_variation(freq, e.prob) < 0.02);
  }
  {
    PartitionChain chain(model, all_in_one(4), 6, lik);
    const auto pairs = ChaperoneDistribution::uniform(4);
    const auto freq = chain_frequencies(e, chain, 120000, [&](PartitionChain &c) { c.chaperones_step(pairs); });
    CHECK(oracle::total_variation(freq, e.prob) < 0.02);
  }
}

TEST_CASE("weighted chaperones") {
  std::vector<std::vector<double>> w(4, std::vector<double>(4, 1.0));
  w[0][1] = w[1][0] = 5.0;
  const ModelParams model = NBNBParams{1.0, 0.8, 2.0, 0.5};
  const Exact e = exact_law(model, 4);
  PartitionChain chain(model, all_in_one(4), 8);
  const auto pairs = ChaperoneDistribution::weighted(w);
  const auto freq = chain_frequencies(e, chain, 120000, [&](PartitionChain &c) { c.chaperones_step(pairs); });
  CHECK(oracle::total_variation(freq, e.prob) < 0.02);

  auto asym = w;
  asym[0][2] = 2.0;
  CHECK_THROWS_AS(ChaperoneDistribution::weighted(asym), std::invalid_argument);
  auto zero = w;
  zero[1][3] = zero[3][1] = 0.0;
  CHECK_THROWS_AS(ChaperoneDistribution::weighted(zero), std::invalid_argument);
  CHECK_THROWS_AS(ChaperoneDistribution::uniform(1), std::invalid_argument);
}

TEST_CASE("a chaperone rule that returns i == j is rejected") {
  PartitionChain chain(DPParams{1.0}, all_in_one(3), 1);
  const auto bad = ChaperoneDistribution::custom(3, [](Rng &) { return std::make_pair<std::size_t, std::size_t>(1, 1); });
  CHECK_THROWS_AS(chain.chaperones_step(bad), std::logic_error);
}

TEST_CASE("chain bookkeeping") {
  PartitionChain chain(NBNBParams{1.0, 0.9, 6.0, 1.0 / 3.0}, all_in_one(50), 3);
  for (int i = 0; i < 20; ++i)
    chain.sweep();
  CHECK(chain.sweep_count() == 20);
  const Partition p = chain.partition();
  CHECK(p.size() == 50);
  std::size_t total = 0;
  for (std::uint32_t c : chain.state().active_clusters())
    total += chain.state().cluster_size(c);
  CHECK(total == 50);
  CHECK(chain.state().num_clusters() == p.num_parts());

  // same seed, same trajectory
  std::vector<std::size_t> a, b;
  sample_conditional(DPParams{3.0}, 30, 10, 99, ChainInit::all_in_one,
                     [&](std::size_t, const ClusterState &s) { a.push_back(s.num_clusters()); });
  sample_conditional(DPParams{3.0}, 30, 10, 99, ChainInit::all_in_one,
                     [&](std::size_t, const ClusterState &s) { b.push_back(s.num_clusters()); });
  CHECK(a == b);
  CHECK(a.size() == 10);
}

TEST_CASE("exact sequential DP sampler at n = 3") {
  const Exact e = exact_law(DPParams{1.0}, 3);
  std::vector<double> freq(e.prob.size(), 0.0);
  Rng rng(23);
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i)
    ++freq[e.index.at(labels_of(sequential_sample_exchangeable(DPParams{1.0}, 3, rng)))];
  for (double &f : freq)
    f /= draws;
  CHECK(oracle::total_variation(freq, e.prob) < 0.005);
}

TEST_CASE("exact sequential PYP and MFM samplers") {
  const std::vector<std::pair<ModelParams, MfmSampling>> cases{
      {PYPParams{0.7, 0.4}, MfmSampling::latent_k},
      {PYPParams{-0.2, 0.5}, MfmSampling::latent_k},
      {MFMParams{1.0, KPrior::shifted_poisson(1.0)}, MfmSampling::latent_k},
      {MFMParams{1.0, KPrior::shifted_poisson(1.0)}, MfmSampling::v_ratio},
      {MFMParams{0.4, KPrior::geometric(0.3)}, MfmSampling::latent_k},
      {MFMParams{0.4, KPrior::geometric(0.3)}, MfmSampling::v_ratio}};
  for (const auto &[model, method] : cases) {
    CAPTURE(format_params(model));
    const Exact e = exact_law(model, 4);
    std::vector<double> freq(e.prob.size(), 0.0);
    Rng rng(31);
    const int draws = 300000;
    for (int i = 0; i < draws; ++i)
      ++freq[e.index.at(labels_of(sequential_sample_exchangeable(model, 4, rng, method)))];
    for (double &f : freq)
      f /= draws;
    CHECK(oracle::total_variation(freq, e.prob) < 0.01);
  }
  Rng rng(1);
  CHECK_THROWS_AS(sequential_sample_exchangeable(NBNBParams{}, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(sequential_sample_exchangeable(DPParams{1.0}, 0, rng), std::invalid_argument);
}
