#include "microclust/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "microclust/partition_io.hpp"
#include "microclust/random.hpp"
#include "microclust/samplers.hpp"

namespace microclust {

namespace {

std::size_t resolve_workers(std::size_t requested, std::size_t tasks) {
  std::size_t w = requested ? requested : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(w, tasks));
}

// Runs body(i) for i in [0, count). Each index is claimed by exactly one
// thread and writes only its own result slot, so output is independent of
// the worker count. The first exception is rethrown after all threads join.
template <class Body>
void parallel_for(std::size_t count, std::size_t workers, Body body) {
  const std::size_t w = resolve_workers(workers, count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count)
        return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  if (w == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t)
      pool.emplace_back(run);
    for (auto &t : pool)
      t.join();
  }
  if (failure)
    std::rethrow_exception(failure);
}

std::string_view source_name(ObservedSource s) {
  switch (s) {
  case ObservedSource::simulated:
    return "simulated";
  case ObservedSource::surrogate:
    return "surrogate";
  case ObservedSource::file:
    return "file";
  }
  return "?";
}

std::uint64_t parse_count(const std::string &key, const std::string &text) {
  std::uint64_t v = 0;
  const char *first = text.data();
  const char *last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw std::invalid_argument(key + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

void write_file(const std::filesystem::path &path, const std::string &contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write '" + path.string() + "'");
  out << contents;
  if (!out)
    throw std::runtime_error("write failed for '" + path.string() + "'");
}

} // namespace

Partition generate_simulated_partition() {
  std::vector<std::size_t> sizes;
  sizes.reserve(4500);
  sizes.insert(sizes.end(), 4100, 1);
  sizes.insert(sizes.end(), 300, 2);
  sizes.insert(sizes.end(), 100, 3);
  return partition_from_sizes(sizes);
}

Partition generate_shiw_surrogate(std::uint64_t seed) {
  constexpr std::size_t singletons = 434, multi = 153, extra = 49;
  Rng rng(seed);
  std::vector<std::size_t> multi_sizes(multi, 2);
  for (std::size_t e = 0; e < extra; ++e)
    ++multi_sizes[rng.uniform_index(multi)];

  std::vector<std::uint32_t> labels;
  labels.reserve(789);
  std::uint32_t label = 0;
  for (std::size_t i = 0; i < singletons; ++i)
    labels.push_back(++label);
  for (std::size_t s : multi_sizes) {
    ++label;
    labels.insert(labels.end(), s, label);
  }
  rng.shuffle(labels.begin(), labels.end());
  return Partition::from_canonical_or_raw(std::move(labels));
}

std::string_view statistic_name(Statistic s) {
  switch (s) {
  case Statistic::singletons:
    return "singletons";
  case Statistic::max_size:
    return "max_cluster_size";
  case Statistic::mean_size:
    return "mean_cluster_size";
  case Statistic::q90:
    return "q90_cluster_size";
  }
  return "?";
}

double statistic_value(const PartitionStats &stats, Statistic s) {
  switch (s) {
  case Statistic::singletons:
    return static_cast<double>(stats.singletons);
  case Statistic::max_size:
    return static_cast<double>(stats.max_size);
  case Statistic::mean_size:
    return stats.mean_size;
  case Statistic::q90:
    return static_cast<double>(stats.q90);
  }
  return 0.0;
}

ExperimentConfig experiment_config_from_key_values(const KeyValues &kv) {
  ExperimentConfig cfg;
  std::map<ModelKind, std::string> params_files;
  for (const auto &[key, value] : kv) {
    if (key == "source") {
      if (value == "simulated")
        cfg.source = ObservedSource::simulated;
      else if (value == "surrogate")
        cfg.source = ObservedSource::surrogate;
      else if (value == "file")
        cfg.source = ObservedSource::file;
      else
        throw std::invalid_argument("source: expected simulated, surrogate or file, got '" + value + "'");
    } else if (key == "partition") {
      cfg.partition_path = value;
    } else if (key == "surrogate_seed") {
      cfg.surrogate_seed = parse_count(key, value);
    } else if (key == "models") {
      cfg.models.clear();
      std::stringstream ss(value);
      std::string name;
      while (std::getline(ss, name, ','))
        if (!name.empty())
          cfg.models.push_back(parse_model_kind(name));
    } else if (key.starts_with("params.")) {
      params_files[parse_model_kind(std::string_view(key).substr(7))] = value;
    } else if (key == "replicates") {
      cfg.replicates = parse_count(key, value);
    } else if (key == "sweeps") {
      cfg.sweeps = parse_count(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_count(key, value);
    } else if (key == "output") {
      cfg.output_dir = value;
    } else if (key == "workers") {
      cfg.workers = parse_count(key, value);
    } else if (key == "mfm_k_prior") {
      cfg.fit.mfm_k_prior = KPrior::parse(value);
    } else {
      throw std::invalid_argument("unknown experiment key '" + key + "'");
    }
  }
  // an implicit file source when only a path is given
  if (kv.find("source") == kv.end() && !cfg.partition_path.empty())
    cfg.source = ObservedSource::file;
  for (const auto &[kind, path] : params_files) {
    ModelParams p = params_from_key_values(read_key_values(path));
    if (kind_of(p) != kind)
      throw std::invalid_argument("params." + std::string(model_name(kind)) + ": file '" + path +
                                  "' holds " + std::string(model_name(kind_of(p))) + " parameters");
    cfg.supplied_params[kind] = p;
  }
  return cfg;
}

void validate(const ExperimentConfig &cfg) {
  if (cfg.replicates < 1)
    throw std::invalid_argument("replicates must be at least 1");
  if (cfg.models.empty())
    throw std::invalid_argument("no models selected");
  if (cfg.source == ObservedSource::file) {
    if (cfg.partition_path.empty())
      throw std::invalid_argument("source=file needs a partition path");
    if (!std::filesystem::exists(cfg.partition_path))
      throw std::invalid_argument("partition file '" + cfg.partition_path.string() + "' does not exist");
  }
  for (const auto &[kind, p] : cfg.supplied_params)
    validate(p);
}

Partition load_observed(const ExperimentConfig &cfg) {
  switch (cfg.source) {
  case ObservedSource::simulated:
    return generate_simulated_partition();
  case ObservedSource::surrogate:
    return generate_shiw_surrogate(cfg.surrogate_seed);
  case ObservedSource::file:
    return read_partition(cfg.partition_path);
  }
  throw std::invalid_argument("unknown observed-partition source");
}

std::uint64_t replicate_seed(std::uint64_t base, ModelKind kind, std::size_t r) {
  return base + static_cast<std::uint64_t>(r) + (static_cast<std::uint64_t>(kind) << 32);
}

Partition draw_replicate(const ModelParams &params, std::size_t n, std::size_t sweeps, std::uint64_t seed) {
  const ModelKind kind = kind_of(params);
  if (kind == ModelKind::nbnb || kind == ModelKind::perps)
    return sample_conditional(params, n, sweeps, seed, ChainInit::all_in_one);
  Rng rng(seed);
  return sequential_sample_exchangeable(params, n, rng);
}

ExperimentResult run_model_fit_experiment(const ExperimentConfig &cfg) {
  validate(cfg);
  return run_model_fit_experiment(cfg, load_observed(cfg));
}

ExperimentResult run_model_fit_experiment(const ExperimentConfig &cfg, const Partition &observed) {
  validate(cfg);
  if (observed.empty())
    throw std::invalid_argument("the observed partition is empty");
  ExperimentResult result;
  result.observed = observed;
  const SizeProfile profile = observed.profile();
  const PartitionStats observed_stats = compute_statistics(profile);
  const std::size_t n = observed.size();

  for (ModelKind kind : cfg.models) {
    ModelOutcome outcome;
    outcome.model = kind;
    try {
      if (auto it = cfg.supplied_params.find(kind); it != cfg.supplied_params.end()) {
        outcome.params = it->second;
      } else {
        outcome.fit = fit_mle(kind, profile, cfg.fit);
        outcome.params = outcome.fit->params;
      }

      std::vector<PartitionStats> stats(cfg.replicates);
      const ModelParams params = *outcome.params;
      parallel_for(cfg.replicates, cfg.workers, [&](std::size_t r) {
        stats[r] = compute_statistics(draw_replicate(params, n, cfg.sweeps, replicate_seed(cfg.seed, kind, r)));
      });

      for (Statistic s : kAllStatistics) {
        StatDistribution d;
        d.model = kind;
        d.statistic = s;
        d.observed = statistic_value(observed_stats, s);
        d.values.reserve(stats.size());
        for (const auto &st : stats)
          d.values.push_back(statistic_value(st, s));
        result.distributions.push_back(std::move(d));
      }
    } catch (const std::exception &e) {
      outcome.error = e.what();
    }
    result.outcomes.push_back(std::move(outcome));
  }
  return result;
}

double quantile_linear(std::span<const double> ascending, double prob) {
  if (ascending.empty())
    throw std::invalid_argument("quantile_linear: empty sample");
  if (!(prob >= 0.0 && prob <= 1.0))
    throw std::domain_error("quantile_linear: probability outside [0, 1]");
  const double h = static_cast<double>(ascending.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, ascending.size() - 1);
  return ascending[lo] + (h - static_cast<double>(lo)) * (ascending[hi] - ascending[lo]);
}

void write_distributions(std::span<const StatDistribution> dists, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream summary;
  summary << "# model,statistic,observed,min,q1,median,q3,max\n";
  for (const auto &d : dists) {
    const std::string stem = std::string(model_name(d.model)) + "_" + std::string(statistic_name(d.statistic));
    std::ostringstream rows;
    rows << "# replicate,value\n";
    for (std::size_t r = 0; r < d.values.size(); ++r)
      rows << r + 1 << ',' << format_number(d.values[r]) << '\n';
    write_file(dir / (stem + ".txt"), rows.str());

    if (d.values.empty())
      continue;
    std::vector<double> sorted = d.values;
    std::sort(sorted.begin(), sorted.end());
    summary << model_name(d.model) << ',' << statistic_name(d.statistic) << ',' << format_number(d.observed);
    for (double prob : {0.0, 0.25, 0.5, 0.75, 1.0})
      summary << ',' << format_number(quantile_linear(sorted, prob));
    summary << '\n';
  }
  write_file(dir / "summary.txt", summary.str());
}

void write_experiment_outputs(const ExperimentResult &result, const ExperimentConfig &cfg) {
  if (cfg.output_dir.empty())
    throw std::invalid_argument("no output directory configured");
  write_distributions(result.distributions, cfg.output_dir);

  std::ostringstream fits;
  fits << "# model,source,log_lik,params\n";
  for (const auto &o : result.outcomes) {
    fits << model_name(o.model) << ',';
    if (!o.error.empty()) {
      fits << "error,," << o.error << '\n';
      continue;
    }
    const double ll = log_likelihood(*o.params, result.observed.profile());
    fits << (o.fit ? "mle" : "supplied") << ',' << format_number(ll) << ',' << format_params(*o.params) << '\n';
  }
  write_file(cfg.output_dir / "fits.txt", fits.str());

  // worker count is deliberately absent: it never changes the results
  std::ostringstream run;
  run << "# key=value\n";
  run << "source=" << source_name(cfg.source) << '\n';
  if (cfg.source == ObservedSource::file)
    run << "partition=" << cfg.partition_path.string() << '\n';
  if (cfg.source == ObservedSource::surrogate)
    run << "surrogate_seed=" << cfg.surrogate_seed << '\n';
  run << "n=" << result.observed.size() << '\n';
  run << "models=";
  for (std::size_t i = 0; i < cfg.models.size(); ++i)
    run << (i ? "," : "") << model_name(cfg.models[i]);
  run << '\n';
  run << "replicates=" << cfg.replicates << '\n';
  run << "sweeps=" << cfg.sweeps << '\n';
  run << "seed=" << cfg.seed << '\n';
  run << "mfm_k_prior=" << cfg.fit.mfm_k_prior.to_string() << '\n';
  write_file(cfg.output_dir / "run.txt", run.str());
}

std::pair<double, double> negative_binomial_from_moments(double mean, double variance) {
  if (!(mean > 0.0) || !(variance > mean))
    throw std::domain_error("negative_binomial_from_moments: needs variance > mean > 0");
  // mean = r p / (1 - p), variance = mean / (1 - p)
  const double p = (variance - mean) / variance;
  const double r = mean * mean / (variance - mean);
  return {r, p};
}

double DiagnosticCurve::median(std::size_t g) const {
  std::vector<double> v = ratios.at(g);
  std::sort(v.begin(), v.end());
  return quantile_linear(v, 0.5);
}

DiagnosticCurve run_microclustering_diagnostic(const DiagnosticConfig &cfg) {
  if (cfg.grid.empty() || cfg.grid.front() < 1)
    throw std::invalid_argument("diagnostic grid must be non-empty with sizes >= 1");
  for (std::size_t g = 1; g < cfg.grid.size(); ++g)
    if (cfg.grid[g] <= cfg.grid[g - 1])
      throw std::invalid_argument("diagnostic grid must be strictly increasing");
  if (cfg.replicates < 1)
    throw std::invalid_argument("diagnostic needs at least one replicate");
  validate(cfg.params);

  DiagnosticCurve curve;
  curve.grid = cfg.grid;
  curve.ratios.assign(cfg.grid.size(), std::vector<double>(cfg.replicates));
  // largest sizes first so a pool is not left waiting on one long chain
  const std::size_t tasks = cfg.grid.size() * cfg.replicates;
  parallel_for(tasks, cfg.workers, [&](std::size_t t) {
    const std::size_t g = cfg.grid.size() - 1 - t / cfg.replicates;
    const std::size_t rep = t % cfg.replicates;
    const std::size_t n = cfg.grid[g];
    const std::uint64_t seed = cfg.seed + rep + (static_cast<std::uint64_t>(g) << 32);
    PartitionChain chain(cfg.params, all_in_one(n), seed);
    for (std::size_t s = 0; s < cfg.sweeps; ++s)
      chain.sweep();
    curve.ratios[g][rep] = static_cast<double>(chain.state().max_cluster_size()) / static_cast<double>(n);
  });
  return curve;
}

} // namespace microclust
