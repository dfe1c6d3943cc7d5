#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "microclust/combinatorics.hpp"
#include "microclust/enumerate.hpp"
#include "microclust/experiment.hpp"
#include "microclust/fit.hpp"
#include "microclust/models.hpp"
#include "microclust/params_io.hpp"
#include "microclust/partition_io.hpp"
#include "microclust/random.hpp"
#include "microclust/samplers.hpp"

using namespace microclust;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr std::size_t kMaxCliEnumeration = 8;

// Bad flag combinations and values; reported with exit code 1.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ModelFlags {
  std::string model;
  std::string params_file;
  std::optional<double> a, q, r, p, alpha, lambda, theta, delta, gamma;
  std::string k_prior;
};

void add_model_flags(CLI::App *cmd, ModelFlags &f) {
  cmd->add_option("--model", f.model, "Model: nbnb, perps, dp, pyp or mfm");
  cmd->add_option("--params", f.params_file, "Parameter file (key=value); flags override its keys")
      ->check(CLI::ExistingFile);
  cmd->add_option("--a", f.a, "NBNB: shape of the cluster-count distribution");
  cmd->add_option("--q", f.q, "NBNB: probability of the cluster-count distribution");
  cmd->add_option("--r", f.r, "NBNB: shape of the cluster-size distribution");
  cmd->add_option("--p", f.p, "NBNB: probability of the cluster-size distribution");
  cmd->add_option("--alpha", f.alpha, "PERPS: mean cluster count");
  cmd->add_option("--lambda", f.lambda, "PERPS: mean cluster size");
  cmd->add_option("--theta", f.theta, "DP / PYP: concentration");
  cmd->add_option("--delta", f.delta, "PYP: discount in [0, 1)");
  cmd->add_option("--gamma", f.gamma, "MFM: Dirichlet weight parameter");
  cmd->add_option("--k-prior", f.k_prior, "MFM: K prior, e.g. geometric:6e-05, poisson:1, point:3");
}

ModelParams resolve_model(const ModelFlags &f) {
  KeyValues kv;
  if (!f.params_file.empty())
    kv = read_key_values(f.params_file);
  auto put = [&](const char *key, const std::string &value, const char *flag) {
    if (kv.count(key) && !f.params_file.empty())
      std::cerr << "note: " << flag << " overrides " << key << " from " << f.params_file << '\n';
    kv[key] = value;
  };
  if (!f.model.empty()) {
    if (auto it = kv.find("model"); it != kv.end() && it->second != f.model)
      throw UsageError("--model " + f.model + " conflicts with model=" + it->second + " in " + f.params_file);
    kv["model"] = f.model;
  }
  if (!kv.count("model"))
    throw UsageError("no model given; pass --model or a --params file with model=<name>");
  const std::pair<const char *, const std::optional<double> *> numeric[] = {
      {"a", &f.a},         {"q", &f.q},         {"r", &f.r},     {"p", &f.p},         {"alpha", &f.alpha},
      {"lambda", &f.lambda}, {"theta", &f.theta}, {"delta", &f.delta}, {"gamma", &f.gamma}};
  for (const auto &[key, value] : numeric)
    if (value->has_value())
      put(key, format_number(**value), (std::string("--") + key).c_str());
  if (!f.k_prior.empty())
    put("k_prior", f.k_prior, "--k-prior");
  try {
    return params_from_key_values(kv);
  } catch (const std::invalid_argument &e) {
    throw UsageError(e.what());
  } catch (const std::domain_error &e) {
    throw UsageError(e.what());
  }
}

struct PartitionFlags {
  std::string path;
  std::string builtin;
  std::uint64_t surrogate_seed = 1;
};

void add_partition_flags(CLI::App *cmd, PartitionFlags &f) {
  auto *path = cmd->add_option("--partition", f.path, "Observed partition file (membership or sizes format)")
                   ->check(CLI::ExistingFile);
  cmd->add_option("--builtin", f.builtin, "Builtin partition: simulated or surrogate")
      ->check(CLI::IsMember({"simulated", "surrogate"}))
      ->excludes(path);
  cmd->add_option("--surrogate-seed", f.surrogate_seed, "Seed of the surrogate partition")->capture_default_str();
}

Partition resolve_partition(const PartitionFlags &f) {
  if (!f.path.empty())
    return read_partition(std::filesystem::path(f.path));
  if (f.builtin == "simulated")
    return generate_simulated_partition();
  if (f.builtin == "surrogate")
    return generate_shiw_surrogate(f.surrogate_seed);
  throw UsageError("no partition given; pass --partition <file> or --builtin simulated|surrogate");
}

// Output goes to --output when given, stdout otherwise.
class Output {
public:
  explicit Output(const std::string &path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_)
        throw std::runtime_error("cannot write '" + path + "'");
    }
  }
  std::ostream &stream() { return file_.is_open() ? static_cast<std::ostream &>(file_) : std::cout; }

private:
  std::ofstream file_;
};

std::string join_labels(std::span<const std::uint32_t> labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i)
      s += ' ';
    s += std::to_string(labels[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------

struct FitCmd {
  PartitionFlags partition;
  std::string model;
  std::size_t restarts = 20;
  std::string k_prior = KPrior::geometric(kDefaultMfmGeometricRate).to_string();
  bool closed_form = false;
};

int run_fit(const FitCmd &c) {
  const Partition observed = resolve_partition(c.partition);
  ModelKind kind;
  try {
    kind = parse_model_kind(c.model);
  } catch (const std::invalid_argument &e) {
    throw UsageError(e.what());
  }
  if (c.closed_form) {
    if (kind != ModelKind::perps)
      throw UsageError("--closed-form applies to --model perps only");
    const PERPSParams p = perps_mle_closed_form(observed);
    std::cout << format_params(p) << '\n' << "log_lik=" << format_number(log_likelihood(p, observed.profile())) << '\n';
    return 0;
  }
  FitOptions opts;
  opts.restarts = c.restarts;
  opts.mfm_k_prior = KPrior::parse(c.k_prior);
  const FitResult r = fit_mle(kind, observed, opts);
  std::cout << format_params(r.params) << '\n'
            << "log_lik=" << format_number(r.log_lik) << '\n'
            << "iterations=" << r.iterations << '\n'
            << "converged=" << (r.converged ? "true" : "false") << '\n'
            << "simplex_spread=" << format_number(r.simplex_spread) << '\n';
  return 0;
}

struct SampleCmd {
  ModelFlags model;
  std::size_t n = 0;
  std::size_t replicates = 1;
  std::size_t sweeps = 1000;
  std::uint64_t seed = 1;
  std::string method = "auto";
  std::string init = "one";
  bool trace = false;
  std::string output;
};

int run_sample(const SampleCmd &c) {
  const ModelParams params = resolve_model(c.model);
  const ModelKind kind = kind_of(params);
  std::string method = c.method;
  if (method == "auto")
    method = (kind == ModelKind::nbnb || kind == ModelKind::perps) ? "reseat" : "exact";
  const bool chain = method == "reseat" || method == "chaperones";
  if (method == "exact" && (kind == ModelKind::nbnb || kind == ModelKind::perps))
    throw UsageError("--method exact is available for dp, pyp and mfm; use reseat, chaperones or generative");
  if (method == "generative" && kind != ModelKind::nbnb && kind != ModelKind::perps)
    throw UsageError("--method generative is available for nbnb and perps only");
  if (method != "generative" && c.n == 0)
    throw UsageError("--n is required and must be at least 1");
  if (c.trace && !chain)
    throw UsageError("--trace needs a chain method (reseat or chaperones)");
  if (method == "chaperones" && c.n < 2)
    throw UsageError("--method chaperones needs --n of at least 2");

  Output out(c.output);
  std::ostream &os = out.stream();
  const std::string echo = "; seed=" + std::to_string(c.seed) + " method=" + method + " " + format_params(params);

  if (c.trace) {
    os << "# replicate,sweep,num_clusters,max_cluster_size" << echo << '\n';
  } else if (method == "generative") {
    os << "# replicate,element_id,cluster_label" << echo << '\n';
  } else if (c.replicates == 1) {
    os << "# element_id,cluster_label" << echo << '\n';
  } else {
    os << "# replicate,element_id,cluster_label" << echo << '\n';
  }

  const ChainInit init = c.init == "one" ? ChainInit::all_in_one : ChainInit::all_singletons;
  for (std::size_t rep = 0; rep < c.replicates; ++rep) {
    const std::uint64_t seed = c.seed + rep;
    Partition part;
    if (method == "generative") {
      Rng rng(seed);
      part = kind == ModelKind::nbnb ? sample_generative(std::get<NBNBParams>(params), rng).partition
                                     : sample_generative(std::get<PERPSParams>(params), rng).partition;
    } else if (method == "exact") {
      Rng rng(seed);
      part = sequential_sample_exchangeable(params, c.n, rng);
    } else {
      PartitionChain ch(params, initial_partition(init, c.n), seed);
      // a chaperones sweep is n pair updates
      const auto pairs = ChaperoneDistribution::uniform(c.n);
      for (std::size_t s = 1; s <= c.sweeps; ++s) {
        if (method == "reseat") {
          ch.sweep();
        } else {
          for (std::size_t i = 0; i < c.n; ++i)
            ch.chaperones_step(pairs);
        }
        if (c.trace)
          os << rep + 1 << ',' << s << ',' << ch.state().num_clusters() << ',' << ch.state().max_cluster_size()
             << '\n';
      }
      part = ch.partition();
    }
    if (c.trace)
      continue;
    for (std::size_t i = 0; i < part.size(); ++i) {
      if (c.replicates > 1 || method == "generative")
        os << rep + 1 << ',';
      os << i + 1 << ',' << part.label(i) << '\n';
    }
  }
  return 0;
}

struct StatsCmd {
  PartitionFlags partition;
};

int run_stats(const StatsCmd &c) {
  const Partition p = resolve_partition(c.partition);
  if (p.empty())
    throw std::runtime_error("the partition is empty");
  const PartitionStats s = compute_statistics(p);
  std::cout << "n=" << p.size() << '\n'
            << "num_clusters=" << p.num_parts() << '\n'
            << "singletons=" << s.singletons << '\n'
            << "max_cluster_size=" << s.max_size << '\n'
            << "mean_cluster_size=" << format_number(s.mean_size) << '\n'
            << "q90_cluster_size=" << s.q90 << '\n';
  return 0;
}

struct EnumerateCmd {
  ModelFlags model;
  std::size_t n = 0;
};

int run_enumerate(const EnumerateCmd &c) {
  const ModelParams params = resolve_model(c.model);
  if (c.n < 1 || c.n > kMaxCliEnumeration)
    throw UsageError("--n must be between 1 and " + std::to_string(kMaxCliEnumeration) + " (there are " +
                     std::to_string(bell_number(kMaxCliEnumeration)) + " partitions at n = 8)");
  const ConditionalLaw law(params);
  std::cout << "# labels,probability; " << format_params(params) << '\n';
  for_each_partition(c.n, [&](const Partition &part) {
    std::cout << join_labels(part.labels()) << ',' << format_number(std::exp(law.log_prob(part))) << '\n';
  });
  return 0;
}

struct ExperimentCmd {
  std::string config;
  std::string output;
  std::optional<std::size_t> replicates, sweeps, workers;
  std::optional<std::uint64_t> seed;
  std::string models;
};

int run_experiment(const ExperimentCmd &c) {
  KeyValues kv;
  if (!c.config.empty())
    kv = read_key_values(c.config);
  auto put = [&](const char *key, const std::string &value) {
    if (auto it = kv.find(key); it != kv.end() && it->second != value)
      std::cerr << "note: --" << key << ' ' << value << " overrides " << key << '=' << it->second << " from "
                << c.config << '\n';
    kv[key] = value;
  };
  if (!c.output.empty())
    put("output", c.output);
  if (c.replicates)
    put("replicates", std::to_string(*c.replicates));
  if (c.sweeps)
    put("sweeps", std::to_string(*c.sweeps));
  if (c.workers)
    put("workers", std::to_string(*c.workers));
  if (c.seed)
    put("seed", std::to_string(*c.seed));
  if (!c.models.empty())
    put("models", c.models);

  ExperimentConfig cfg;
  try {
    cfg = experiment_config_from_key_values(kv);
    validate(cfg);
  } catch (const std::invalid_argument &e) {
    throw UsageError(e.what());
  }
  if (cfg.output_dir.empty())
    throw UsageError("no output directory; pass --output or set output= in the config");

  const ExperimentResult result = run_model_fit_experiment(cfg);
  write_experiment_outputs(result, cfg);
  int status = 0;
  for (const auto &o : result.outcomes) {
    if (!o.error.empty()) {
      std::cerr << "error: " << model_name(o.model) << ": " << o.error << '\n';
      status = kExitRuntime;
    }
  }
  std::cout << "# model,statistic,observed,median; seed=" << cfg.seed << '\n';
  for (const auto &d : result.distributions) {
    std::vector<double> v = d.values;
    std::sort(v.begin(), v.end());
    std::cout << model_name(d.model) << ',' << statistic_name(d.statistic) << ',' << format_number(d.observed) << ','
              << format_number(quantile_linear(v, 0.5)) << '\n';
  }
  return status;
}

struct DiagnosticCmd {
  std::vector<std::size_t> grid{10, 100, 1000, 10000};
  std::size_t replicates = 10;
  std::size_t sweeps = 1000;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
  double a = 1.0, q = 0.9;
  double size_mean = 3.0, size_variance = 4.5;
};

int run_diagnostic(const DiagnosticCmd &c) {
  DiagnosticConfig cfg;
  cfg.grid = c.grid;
  cfg.replicates = c.replicates;
  cfg.sweeps = c.sweeps;
  cfg.seed = c.seed;
  cfg.workers = c.workers;
  try {
    const auto [r, p] = negative_binomial_from_moments(c.size_mean, c.size_variance);
    cfg.params = NBNBParams{c.a, c.q, r, p};
    validate(cfg.params);
  } catch (const std::domain_error &e) {
    throw UsageError(e.what());
  }
  const DiagnosticCurve curve = run_microclustering_diagnostic(cfg);
  std::cout << "# n,replicate,ratio; seed=" << cfg.seed << " sweeps=" << cfg.sweeps << ' ' << format_params(cfg.params)
            << '\n';
  for (std::size_t g = 0; g < curve.grid.size(); ++g)
    for (std::size_t rep = 0; rep < curve.ratios[g].size(); ++rep)
      std::cout << curve.grid[g] << ',' << rep + 1 << ',' << format_number(curve.ratios[g][rep]) << '\n';
  for (std::size_t g = 0; g < curve.grid.size(); ++g)
    std::cerr << "median M_N/N at n=" << curve.grid[g] << ": " << format_number(curve.median(g)) << '\n';
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Random partition models for entity resolution: fitting, sampling and model checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "microclust 1.0");

  FitCmd fit;
  auto *fit_cmd = app.add_subcommand("fit", "Maximum-likelihood fit of a model to an observed partition");
  add_partition_flags(fit_cmd, fit.partition);
  fit_cmd->add_option("--model", fit.model, "Model: nbnb, perps, dp, pyp or mfm")->required();
  fit_cmd->add_option("--restarts", fit.restarts, "Optimizer start points")->capture_default_str()->check(
      CLI::PositiveNumber);
  fit_cmd->add_option("--k-prior", fit.k_prior, "MFM: K prior held fixed while fitting gamma")->capture_default_str();
  fit_cmd->add_flag("--closed-form", fit.closed_form, "PERPS: solve the likelihood equations directly");

  SampleCmd sample;
  auto *sample_cmd = app.add_subcommand("sample", "Draw partitions from a model");
  add_model_flags(sample_cmd, sample.model);
  sample_cmd->add_option("--n", sample.n, "Number of elements (ignored by --method generative)");
  sample_cmd->add_option("--replicates", sample.replicates, "Independent draws")->capture_default_str()->check(
      CLI::PositiveNumber);
  sample_cmd->add_option("--sweeps", sample.sweeps, "Chain length in sweeps")->capture_default_str();
  sample_cmd->add_option("--seed", sample.seed, "Random seed; replicate i uses seed + i")->capture_default_str();
  sample_cmd->add_option("--method", sample.method, "auto, reseat, chaperones, exact or generative")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "reseat", "chaperones", "exact", "generative"}));
  sample_cmd->add_option("--init", sample.init, "Chain start: one (single cluster) or singletons")
      ->capture_default_str()
      ->check(CLI::IsMember({"one", "singletons"}));
  sample_cmd->add_flag("--trace", sample.trace, "Print cluster count and largest cluster after every sweep");
  sample_cmd->add_option("--output", sample.output, "Write to this file instead of stdout");

  StatsCmd stats;
  auto *stats_cmd = app.add_subcommand("stats", "Singletons, largest, mean and 90% quantile cluster size");
  add_partition_flags(stats_cmd, stats.partition);

  EnumerateCmd enumerate;
  auto *enum_cmd = app.add_subcommand("enumerate", "Exact distribution over all partitions of n <= 8 elements");
  add_model_flags(enum_cmd, enumerate.model);
  enum_cmd->add_option("--n", enumerate.n, "Number of elements (at most 8)")->required();

  ExperimentCmd experiment;
  auto *exp_cmd = app.add_subcommand("experiment", "Fit every model and simulate replicate statistics");
  exp_cmd->add_option("--config", experiment.config, "Experiment config file (key=value)")->check(CLI::ExistingFile);
  exp_cmd->add_option("--output", experiment.output, "Output directory");
  exp_cmd->add_option("--replicates", experiment.replicates, "Replicates per model");
  exp_cmd->add_option("--sweeps", experiment.sweeps, "Chain sweeps per NBNB / PERPS replicate");
  exp_cmd->add_option("--seed", experiment.seed, "Base seed");
  exp_cmd->add_option("--workers", experiment.workers, "Worker threads (0: all cores); never changes results");
  exp_cmd->add_option("--models", experiment.models, "Comma-separated model list");

  DiagnosticCmd diag;
  auto *diag_cmd =
      app.add_subcommand("check-microclustering", "Largest-cluster fraction of NBNB chains over a grid of sizes");
  diag_cmd->add_option("--grid", diag.grid, "Strictly increasing element counts")->delimiter(',')->capture_default_str();
  diag_cmd->add_option("--replicates", diag.replicates, "Chains per grid size")->capture_default_str();
  diag_cmd->add_option("--sweeps", diag.sweeps, "Sweeps per chain")->capture_default_str();
  diag_cmd->add_option("--seed", diag.seed, "Base seed")->capture_default_str();
  diag_cmd->add_option("--workers", diag.workers, "Worker threads (0: all cores); never changes results");
  diag_cmd->add_option("--a", diag.a, "Cluster-count shape")->capture_default_str();
  diag_cmd->add_option("--q", diag.q, "Cluster-count probability")->capture_default_str();
  diag_cmd->add_option("--size-mean", diag.size_mean, "Mean cluster size")->capture_default_str();
  diag_cmd->add_option("--size-variance", diag.size_variance, "Cluster-size variance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*fit_cmd)
      return run_fit(fit);
    if (*sample_cmd)
      return run_sample(sample);
    if (*stats_cmd)
      return run_stats(stats);
    if (*enum_cmd)
      return run_enumerate(enumerate);
    if (*exp_cmd)
      return run_experiment(experiment);
    if (*diag_cmd)
      return run_diagnostic(diag);
  } catch (const UsageError &e) {
    std::cerr << "usage error: " << e.what() << " (see --help)\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
