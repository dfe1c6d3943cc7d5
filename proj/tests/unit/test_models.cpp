#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "microclust/combinatorics.hpp"
#include "microclust/enumerate.hpp"
#include "microclust/models.hpp"
#include "microclust/params_io.hpp"
#include "microclust/partition.hpp"
#include "microclust/random.hpp"
#include "microclust/samplers.hpp"
#include "oracles.hpp"

using namespace microclust;

namespace {

// NegBin pmf from its definition, in plain doubles.
double negbin_pmf(double shape, double prob, int k) {
  return std::exp(std::lgamma(shape + k) - std::lgamma(shape) - std::lgamma(k + 1.0)) * std::pow(1.0 - prob, shape) *
         std::pow(prob, k);
}

double poisson_pmf(double mean, int k) { return std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0)); }

// P(C, N = |C|) straight from the generative story: K clusters, the
// non-empty ones are exactly the parts of C (choose which of the K slots,
// ordered), the rest empty, labels uniformly permuted.
template <class SizePmf, class CountPmf>
double joint_from_story(const Partition &part, SizePmf size_pmf, CountPmf count_pmf, int k_max) {
  const auto sizes = part.sorted_sizes();
  const int parts = static_cast<int>(sizes.size());
  const double n = static_cast<double>(part.size());
  double total = 0.0;
  for (int k = parts; k <= k_max; ++k) {
    double given_k = std::exp(std::lgamma(k + 1.0) - std::lgamma(k - parts + 1.0)) * std::pow(size_pmf(0), k - parts);
    for (std::size_t s : sizes)
      given_k *= size_pmf(static_cast<int>(s)) * std::tgamma(static_cast<double>(s) + 1.0);
    given_k /= std::tgamma(n + 1.0);
    total += count_pmf(k) * given_k;
  }
  return total;
}

// sum over partitions of [n] of exp(f(profile)), grouped by integer partition
template <class F>
double sum_over_set_partitions(std::size_t n, F log_prob) {
  double total = 0.0;
  oracle::for_each_integer_partition(n, [&](const std::vector<std::size_t> &parts) {
    total += std::exp(oracle::log_set_partition_count(parts) + log_prob(partition_from_sizes(parts).profile()));
  });
  return total;
}

} // namespace

TEST_CASE("beta at the worked example") {
  const NBNBParams m{1.0, 0.9, 6.0, 1.0 / 3.0};
  const double s = 0.9 * std::pow(2.0 / 3.0, 6.0);
  CHECK(m.beta() == doctest::Approx(s / (1.0 - s)).epsilon(1e-14));
  CHECK(m.beta() == doctest::Approx(0.08579).epsilon(1e-4));
}

TEST_CASE("reseating weights at the worked example") {
  const NBNBParams m{1.0, 0.9, 6.0, 1.0 / 3.0};
  const ReseatRule rule = make_reseat_rule(m, 5);
  const std::vector<std::size_t> remaining{2, 1, 1};
  const ReseatWeights w = reseating_weights(rule, remaining);
  CHECK(w.existing[0] == doctest::Approx(8.0));
  CHECK(w.existing[1] == doctest::Approx(7.0));
  CHECK(w.new_cluster == doctest::Approx(4.0 * m.beta() * 6.0));
  CHECK(w.new_cluster == doctest::Approx(2.059).epsilon(1e-3));
  CHECK(rule.has_linear_new_weight());
  CHECK(rule.linear_new_weight(3) == doctest::Approx(w.new_cluster));
}

TEST_CASE("reseat rule equals the ratio of conditional weights") {
  const std::vector<ModelParams> models{NBNBParams{1.5, 0.6, 2.0, 0.4}, PERPSParams{3.0, 0.7}, DPParams{1.3},
                                        PYPParams{0.8, 0.35}, PYPParams{-0.2, 0.5},
                                        MFMParams{0.9, KPrior::shifted_poisson(2.0)}};
  for (const auto &model : models) {
    CAPTURE(format_params(model));
    const ConditionalLaw law(model);
    const ReseatRule rule = make_reseat_rule(model, 6);
    // base partition of the first 5 elements; element 6 joins or opens
    for (const Partition &base : enumerate_partitions(5)) {
      std::vector<std::uint32_t> labels(base.labels().begin(), base.labels().end());
      const auto k = static_cast<std::uint32_t>(base.num_parts());
      labels.push_back(k + 1);
      const double log_alone = law.log_weight(Partition::from_canonical_or_raw(labels));
      const double log_new = rule.log_new_weight(k);
      for (std::uint32_t c = 1; c <= k; ++c) {
        labels.back() = c;
        const double log_join = law.log_weight(Partition::from_canonical_or_raw(labels));
        const double want = std::log(rule.existing_weight(base.sizes()[c - 1])) - log_new;
        CHECK(log_join - log_alone == doctest::Approx(want).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("NBNB joint matches the generative story") {
  const NBNBParams m{2.0, 0.4, 1.5, 0.25};
  for (std::size_t n = 1; n <= 5; ++n)
    for (const Partition &p : enumerate_partitions(n)) {
      const double want = joint_from_story(
          p, [&](int s) { return negbin_pmf(m.r, m.p, s); }, [&](int k) { return negbin_pmf(m.a, m.q, k); }, 200);
      CHECK(nbnb_log_prob_joint(m, p) == doctest::Approx(std::log(want)).epsilon(1e-10));
    }
}

TEST_CASE("PERPS joint matches the generative story") {
  const PERPSParams m{2.5, 0.8};
  for (std::size_t n = 1; n <= 5; ++n)
    for (const Partition &p : enumerate_partitions(n)) {
      const double want = joint_from_story(
          p, [&](int s) { return poisson_pmf(m.lambda, s); }, [&](int k) { return poisson_pmf(m.alpha, k); }, 120);
      CHECK(perps_log_prob_joint(m, p) == doctest::Approx(std::log(want)).epsilon(1e-10));
    }
}

TEST_CASE("NBNB joint probability mass over N <= 12") {
  const NBNBParams m{1.0, 0.5, 1.0, 0.3};
  double total = std::exp(nbnb_log_prob_size(m, 0));
  for (std::size_t n = 1; n <= 12; ++n)
    total += sum_over_set_partitions(n, [&](const SizeProfile &pr) { return nbnb_log_prob_joint(m, pr); });
  CHECK(total >= 0.999);
  CHECK(total <= 1.0 + 1e-12);
}

TEST_CASE("PERPS joint probability mass over N <= 14") {
  const PERPSParams m{1.0, 0.5};
  double total = std::exp(perps_log_prob_size(m, 0));
  for (std::size_t n = 1; n <= 14; ++n)
    total += sum_over_set_partitions(n, [&](const SizeProfile &pr) { return perps_log_prob_joint(m, pr); });
  CHECK(total >= 0.999);
  CHECK(total <= 1.0 + 1e-12);
}

TEST_CASE("P(N) series equals the joint summed over partitions") {
  const NBNBParams nb{0.7, 0.8, 2.5, 0.45};
  const PERPSParams pe{4.0, 1.2};
  for (std::size_t n = 0; n <= 10; ++n) {
    CAPTURE(n);
    if (n == 0) {
      // only the empty partition: every cluster is empty
      const double s = nb.q * std::pow(1.0 - nb.p, nb.r);
      CHECK(nbnb_log_prob_size(nb, 0) == doctest::Approx(nb.a * std::log((1.0 - nb.q) / (1.0 - s))));
      CHECK(perps_log_prob_size(pe, 0) == doctest::Approx(-pe.alpha + pe.alpha * std::exp(-pe.lambda)));
      continue;
    }
    const double nb_sum = sum_over_set_partitions(n, [&](const SizeProfile &pr) { return nbnb_log_prob_joint(nb, pr); });
    const double pe_sum = sum_over_set_partitions(n, [&](const SizeProfile &pr) { return perps_log_prob_joint(pe, pr); });
    CHECK(nbnb_log_prob_size(nb, n) == doctest::Approx(std::log(nb_sum)).epsilon(1e-11));
    CHECK(perps_log_prob_size(pe, n) == doctest::Approx(std::log(pe_sum)).epsilon(1e-11));
  }
}

TEST_CASE("brute-force sum over K agrees with the closed form") {
  const NBNBParams m{2.0, 0.4, 1.5, 0.25};
  for (std::size_t n = 1; n <= 5; ++n)
    for (const Partition &p : enumerate_partitions(n))
      CHECK(std::abs(nbnb_log_prob_bruteforce(m, p, 400) - nbnb_log_prob_joint(m, p)) < 1e-8);
  CHECK_THROWS_AS(nbnb_log_prob_bruteforce(NBNBParams{2.0, 0.99, 0.01, 0.01}, all_in_one(3), 5), ConvergenceError);
  CHECK_THROWS_AS(nbnb_log_prob_bruteforce(m, all_singletons(4), 3), std::invalid_argument);
}

TEST_CASE("DP and PYP small cases") {
  const ConditionalLaw dp(DPParams{1.0});
  CHECK(std::exp(dp.log_prob(all_in_one(2))) == doctest::Approx(0.5));
  CHECK(std::exp(dp.log_prob(all_singletons(2))) == doctest::Approx(0.5));
  const ConditionalLaw py(PYPParams{1.0, 0.5});
  CHECK(std::exp(py.log_prob(all_singletons(2))) == doctest::Approx(0.75));
  // delta = 0 is exactly the DP
  for (const Partition &p : enumerate_partitions(5))
    CHECK(pyp_log_eppf(PYPParams{2.3, 0.0}, p) == dp_log_eppf(DPParams{2.3}, p));
}

TEST_CASE("every conditional law is normalized") {
  const std::vector<ModelParams> models{NBNBParams{1.0, 0.9, 6.0, 1.0 / 3.0}, PERPSParams{2.0, 0.5}, DPParams{0.4},
                                        PYPParams{1.0, 0.5}, PYPParams{-0.3, 0.6},
                                        MFMParams{1.0, KPrior::shifted_poisson(1.0)}, MFMParams{0.3}};
  for (const auto &model : models) {
    CAPTURE(format_params(model));
    const ConditionalLaw law(model);
    for (std::size_t n = 1; n <= 7; ++n) {
      LogSumAccumulator acc;
      for_each_partition(n, [&](const Partition &p) { acc.add(law.log_prob(p)); });
      CHECK(std::abs(std::exp(acc.value()) - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("MFM V series against a long direct sum") {
  auto reference = [](double gamma, const KPrior &prior, std::uint64_t n, std::uint64_t t, std::uint64_t terms) {
    long double sum = 0.0L;
    for (std::uint64_t k = t; k < t + terms; ++k) {
      const long double kk = static_cast<long double>(k);
      const long double log_term = std::lgamma(kk + 1.0L) - std::lgamma(kk - t + 1.0L) -
                                   (std::lgamma(gamma * kk + n) - std::lgamma(gamma * kk)) + prior.log_pmf(k);
      sum += std::exp(log_term);
    }
    return static_cast<double>(std::log(sum));
  };
  const KPrior poisson = KPrior::shifted_poisson(1.0);
  for (auto [n, t] : {std::pair<std::uint64_t, std::uint64_t>{5, 1}, {5, 3}, {20, 7}, {100, 40}}) {
    CAPTURE(n);
    CAPTURE(t);
    CHECK(mfm_log_v(MFMParams{1.0, poisson}, n, t) == doctest::Approx(reference(1.0, poisson, n, t, 100000)).epsilon(1e-10));
  }
  // heavy-tailed default prior at the simulated partition's scale
  const KPrior geo = KPrior::geometric(6e-5);
  const double want = reference(0.3, geo, 5000, 4500, 2000000);
  CHECK(mfm_log_v(MFMParams{0.3, geo}, 5000, 4500) == doctest::Approx(want).epsilon(1e-10));
  CHECK(mfm_log_v(MFMParams{1.0, KPrior::point_mass(2)}, 5, 3) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("K prior text form") {
  for (const char *text : {"poisson:1", "geometric:6e-05", "point:3"})
    CHECK(KPrior::parse(text).to_string() == text);
  CHECK_THROWS(KPrior::parse("geometric:0"));
  CHECK_THROWS(KPrior::parse("uniform:3"));
  CHECK_THROWS(KPrior::parse("point:2.5"));
  const KPrior geo = KPrior::geometric(0.25);
  double total = 0.0;
  for (std::uint64_t k = 1; k < 400; ++k)
    total += std::exp(geo.log_pmf(k));
  CHECK(total == doctest::Approx(1.0));
  CHECK(geo.log_pmf(0) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("custom K prior samples by inverse CDF") {
  const KPrior custom = KPrior::custom([](std::uint64_t k) { return k == 2 ? std::log(0.25) : k == 5 ? std::log(0.75) : -INFINITY; }, "two-or-five");
  Rng rng(11);
  int fives = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto k = custom.sample(rng);
    CHECK((k == 2 || k == 5));
    fives += k == 5;
  }
  CHECK(fives / 20000.0 == doctest::Approx(0.75).epsilon(0.03));
  CHECK(custom.to_string() == "two-or-five");
}

TEST_CASE("generative NBNB cluster count has mean a q / (1 - q)") {
  Rng rng(5);
  const NBNBParams m{2.0, 0.5, 1.0, 0.5};
  double total = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i)
    total += static_cast<double>(sample_generative(m, rng).k);
  CHECK(total / draws == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(validate(NBNBParams{1.0, 1.0, 1.0, 0.5}), std::domain_error);
  CHECK_THROWS_AS(validate(NBNBParams{0.0, 0.5, 1.0, 0.5}), std::domain_error);
  CHECK_THROWS_AS(validate(PERPSParams{1.0, 0.0}), std::domain_error);
  CHECK_THROWS_AS(validate(DPParams{-1.0}), std::domain_error);
  CHECK_THROWS_AS(validate(PYPParams{1.0, 1.0}), std::domain_error);
  CHECK_THROWS_AS(validate(PYPParams{-0.5, 0.5}), std::domain_error);
  CHECK_NOTHROW(validate(PYPParams{-0.49, 0.5}));
  CHECK_THROWS_AS(validate(MFMParams{0.0}), std::domain_error);
  CHECK_THROWS_AS(parse_model_kind("ewens"), std::invalid_argument);
  CHECK(model_name(ModelKind::pyp) == "pyp");
}

TEST_CASE("log_likelihood dispatches joint or EPPF") {
  const SizeProfile prof = partition_from_sizes(std::vector<std::size_t>{1, 2, 1}).profile();
  CHECK(log_likelihood(NBNBParams{1, 0.5, 1, 0.5}, prof) == nbnb_log_prob_joint(NBNBParams{1, 0.5, 1, 0.5}, prof));
  CHECK(log_likelihood(PERPSParams{2, 0.5}, prof) == perps_log_prob_joint(PERPSParams{2, 0.5}, prof));
  CHECK(log_likelihood(DPParams{2}, prof) == dp_log_eppf(DPParams{2}, prof));
}
