#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "microclust/fit.hpp"
#include "microclust/models.hpp"
#include "microclust/params_io.hpp"
#include "microclust/partition.hpp"

namespace microclust {

// 5,000 elements in 4,500 clusters: 4,100 singletons, 300 pairs, 100
// triples, laid out block-wise in that order.
Partition generate_simulated_partition();

// Stand-in for the 789-record survey data: 587 clusters of which 434 are
// singletons; the other 355 elements fill 153 clusters of size >= 2 (each
// starts as a pair, the 49 leftovers land in uniformly drawn clusters).
// Element order is shuffled.
Partition generate_shiw_surrogate(std::uint64_t seed);

enum class Statistic { singletons, max_size, mean_size, q90 };

std::string_view statistic_name(Statistic s);
inline constexpr std::array<Statistic, 4> kAllStatistics{Statistic::singletons, Statistic::max_size,
                                                         Statistic::mean_size, Statistic::q90};
double statistic_value(const PartitionStats &stats, Statistic s);

enum class ObservedSource { simulated, surrogate, file };

struct ExperimentConfig {
  ObservedSource source = ObservedSource::simulated;
  std::filesystem::path partition_path;  // source == file
  std::uint64_t surrogate_seed = 1;      // source == surrogate
  std::vector<ModelKind> models = all_model_kinds();
  // models listed here skip fitting and are simulated at these values
  std::map<ModelKind, ModelParams> supplied_params;
  std::size_t replicates = 5000;
  std::size_t sweeps = 1000;  // NBNB / PERPS chain length per replicate
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;
  std::size_t workers = 0;  // 0: one per hardware thread; never affects output
  FitOptions fit{};
};

// Keys: source=simulated|surrogate|file, partition=<path>, surrogate_seed,
// models=nbnb,perps,..., params.<model>=<params file>, replicates, sweeps,
// seed, output, workers, mfm_k_prior. Unknown keys are rejected.
ExperimentConfig experiment_config_from_key_values(const KeyValues &kv);
// replicates >= 1, at least one model, referenced files exist
void validate(const ExperimentConfig &cfg);
Partition load_observed(const ExperimentConfig &cfg);

struct StatDistribution {
  ModelKind model{};
  Statistic statistic{};
  std::vector<double> values;  // one per replicate, in replicate order
  double observed = 0.0;
};

struct ModelOutcome {
  ModelKind model{};
  std::optional<ModelParams> params;
  std::optional<FitResult> fit;  // empty when params were supplied
  std::string error;             // non-empty when fitting or sampling failed
};

struct ExperimentResult {
  Partition observed;
  std::vector<ModelOutcome> outcomes;
  std::vector<StatDistribution> distributions;
};

// Seed of replicate `r` for `kind`; replicates are independent streams.
std::uint64_t replicate_seed(std::uint64_t base, ModelKind kind, std::size_t r);

// Draws one replicate partition of size n at `params`: a reseating chain of
// `sweeps` sweeps from one cluster for NBNB / PERPS, an exact sequential
// draw otherwise.
Partition draw_replicate(const ModelParams &params, std::size_t n, std::size_t sweeps, std::uint64_t seed);

// Fits (or takes) each model's parameters, then simulates replicates in
// parallel. A model whose fit throws is reported in its outcome and the
// others still run. Results do not depend on cfg.workers.
ExperimentResult run_model_fit_experiment(const ExperimentConfig &cfg);
ExperimentResult run_model_fit_experiment(const ExperimentConfig &cfg, const Partition &observed);

// Linear interpolation between order statistics (h = (n - 1) prob).
double quantile_linear(std::span<const double> ascending, double prob);

// `<model>_<statistic>.txt` with rows `replicate,value`, plus `summary.txt`
// with the observed value and min / quartiles / max of each distribution.
void write_distributions(std::span<const StatDistribution> dists, const std::filesystem::path &dir);
// write_distributions plus `fits.txt` and `run.txt` (configuration echo).
void write_experiment_outputs(const ExperimentResult &result, const ExperimentConfig &cfg);

// Size-distribution parameters (r, p) of NegBin(r, p) with the given mean
// and variance; requires variance > mean > 0.
std::pair<double, double> negative_binomial_from_moments(double mean, double variance);

struct DiagnosticConfig {
  std::vector<std::size_t> grid{10, 100, 1000, 10000};
  std::size_t replicates = 10;
  std::size_t sweeps = 1000;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
  NBNBParams params{1.0, 0.9, 6.0, 1.0 / 3.0};
};

struct DiagnosticCurve {
  std::vector<std::size_t> grid;
  std::vector<std::vector<double>> ratios;  // ratios[g][rep] = M_N / N

  double median(std::size_t g) const;
};

// Runs `replicates` reseating chains per grid size from one cluster and
// records largest-cluster fraction of each final state. The grid must be
// strictly increasing and start at >= 1.
DiagnosticCurve run_microclustering_diagnostic(const DiagnosticConfig &cfg);

} // namespace microclust
