#include "microclust/models.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "microclust/combinatorics.hpp"
#include "microclust/params_io.hpp"
#include "microclust/random.hpp"

namespace microclust {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool in_open_unit(double x) { return x > 0.0 && x < 1.0; }
bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

void require(bool ok, const char *what) {
  if (!ok)
    throw std::domain_error(what);
}

double sum_log_rising(const SizeProfile &profile, double x, std::size_t offset) {
  // sum over clusters of log x^{(|c| - offset)}
  double s = 0.0;
  for (const auto &[size, mult] : profile.counts)
    s += static_cast<double>(mult) * log_rising_factorial(x, size - offset);
  return s;
}

// log(1 - exp(x)) for x < 0
double log1m_exp(double x) {
  return x > -0.693147 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

} // namespace

double NBNBParams::log_q_survival() const { return std::log(q) + r * std::log1p(-p); }

double NBNBParams::log_beta() const {
  const double x = log_q_survival();
  return x - log1m_exp(x);
}

double NBNBParams::beta() const { return std::exp(log_beta()); }

// ---------------------------------------------------------------------------
// K prior

KPrior KPrior::shifted_poisson(double rate) {
  require(positive_finite(rate), "shifted Poisson K prior: rate must be positive");
  KPrior k;
  k.kind_ = Kind::shifted_poisson;
  k.param_ = rate;
  return k;
}

KPrior KPrior::geometric(double success_prob) {
  require(success_prob > 0.0 && success_prob <= 1.0,
          "geometric K prior: success probability must be in (0, 1]");
  KPrior k;
  k.kind_ = Kind::geometric;
  k.param_ = success_prob;
  return k;
}

KPrior KPrior::point_mass(std::uint64_t value) {
  require(value >= 1, "point-mass K prior: K must be at least 1");
  KPrior k;
  k.kind_ = Kind::point_mass;
  k.param_ = static_cast<double>(value);
  return k;
}

KPrior KPrior::custom(std::function<double(std::uint64_t)> log_pmf, std::string name) {
  KPrior k;
  k.kind_ = Kind::custom;
  k.custom_ = std::move(log_pmf);
  k.name_ = std::move(name);
  return k;
}

double KPrior::log_pmf(std::uint64_t k) const {
  if (k == 0)
    return kNegInf;
  switch (kind_) {
  case Kind::shifted_poisson:
    return static_cast<double>(k - 1) * std::log(param_) - param_ - std::lgamma(static_cast<double>(k));
  case Kind::geometric:
    if (param_ == 1.0)
      return k == 1 ? 0.0 : kNegInf;
    return std::log(param_) + static_cast<double>(k - 1) * std::log1p(-param_);
  case Kind::point_mass:
    return static_cast<double>(k) == param_ ? 0.0 : kNegInf;
  case Kind::custom:
    return custom_(k);
  }
  return kNegInf;
}

std::uint64_t KPrior::sample(Rng &rng) const {
  switch (kind_) {
  case Kind::shifted_poisson:
    return 1 + rng.poisson(param_);
  case Kind::geometric:
    return rng.geometric(param_);
  case Kind::point_mass:
    return static_cast<std::uint64_t>(param_);
  case Kind::custom:
    break;
  }
  // inverse CDF
  const double u = rng.uniform01();
  double cdf = 0.0;
  for (std::uint64_t k = 1; k <= kMfmSeriesTermCap; ++k) {
    cdf += std::exp(custom_(k));
    if (u < cdf)
      return k;
  }
  throw ConvergenceError("K prior '" + name_ + "': inverse CDF did not reach the draw");
}

std::string KPrior::to_string() const {
  switch (kind_) {
  case Kind::shifted_poisson:
    return "poisson:" + format_number(param_);
  case Kind::geometric:
    return "geometric:" + format_number(param_);
  case Kind::point_mass:
    return "point:" + format_number(param_);
  case Kind::custom:
    break;
  }
  return name_;
}

KPrior KPrior::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw std::invalid_argument("K prior '" + std::string(text) +
                                "': expected poisson:<rate>, geometric:<prob> or point:<k>");
  const std::string_view kind = text.substr(0, colon);
  const double value = parse_number(text.substr(colon + 1));
  if (kind == "poisson")
    return shifted_poisson(value);
  if (kind == "geometric")
    return geometric(value);
  if (kind == "point") {
    require(value >= 1.0 && value == std::floor(value), "point-mass K prior: K must be a positive integer");
    return point_mass(static_cast<std::uint64_t>(value));
  }
  throw std::invalid_argument("unknown K prior kind '" + std::string(kind) + "'");
}

// ---------------------------------------------------------------------------
// names and validation

ModelKind kind_of(const ModelParams &params) { return static_cast<ModelKind>(params.index()); }

std::string_view model_name(ModelKind kind) {
  switch (kind) {
  case ModelKind::nbnb:
    return "nbnb";
  case ModelKind::perps:
    return "perps";
  case ModelKind::dp:
    return "dp";
  case ModelKind::pyp:
    return "pyp";
  case ModelKind::mfm:
    return "mfm";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : all_model_kinds())
    if (model_name(k) == name)
      return k;
  throw std::invalid_argument("unknown model '" + std::string(name) +
                              "' (expected one of nbnb, perps, dp, pyp, mfm)");
}

void validate(const NBNBParams &m) {
  require(positive_finite(m.a), "nbnb: a must be positive");
  require(in_open_unit(m.q), "nbnb: q must lie in (0, 1)");
  require(positive_finite(m.r), "nbnb: r must be positive");
  require(in_open_unit(m.p), "nbnb: p must lie in (0, 1)");
}

void validate(const PERPSParams &m) {
  require(positive_finite(m.alpha), "perps: alpha must be positive");
  require(positive_finite(m.lambda), "perps: lambda must be positive");
}

void validate(const DPParams &m) { require(positive_finite(m.theta), "dp: theta must be positive"); }

void validate(const PYPParams &m) {
  require(m.delta >= 0.0 && m.delta < 1.0, "pyp: delta must lie in [0, 1)");
  require(std::isfinite(m.theta) && m.theta > -m.delta, "pyp: theta must exceed -delta");
}

void validate(const MFMParams &m) {
  require(positive_finite(m.gamma), "mfm: gamma must be positive");
  require(in_open_unit(m.tolerance), "mfm: tolerance must lie in (0, 1)");
}

void validate(const ModelParams &params) {
  std::visit([](const auto &m) { validate(m); }, params);
}

// ---------------------------------------------------------------------------
// NBNB

double nbnb_log_prob_joint(const NBNBParams &m, const SizeProfile &profile) {
  validate(m);
  const auto n = static_cast<double>(profile.n);
  const auto k = static_cast<double>(profile.num_parts);
  const double x = m.log_q_survival();
  return n * std::log(m.p) - log_factorial(profile.n) + log_rising_factorial(m.a, profile.num_parts) +
         m.a * std::log1p(-m.q) + k * x - (m.a + k) * log1m_exp(x) + sum_log_rising(profile, m.r, 0);
}

double nbnb_log_prob_joint(const NBNBParams &m, const Partition &part) {
  return nbnb_log_prob_joint(m, part.profile());
}

double nbnb_log_prob_bruteforce(const NBNBParams &m, const Partition &part, std::uint64_t k_max) {
  validate(m);
  const SizeProfile profile = part.profile();
  const std::uint64_t parts = profile.num_parts;
  if (k_max < parts)
    throw std::invalid_argument("nbnb_log_prob_bruteforce: k_max below the number of parts");

  // log P(C | K) = log(p^N / N!) + K r log(1 - p) + sum_c log r^{(|c|)} + log(K! / (K - |C|)!)
  // log P(K)     = log a^{(K)} - log K! + a log(1 - q) + K log q
  const double fixed = static_cast<double>(profile.n) * std::log(m.p) - log_factorial(profile.n) +
                       sum_log_rising(profile, m.r, 0) + m.a * std::log1p(-m.q);
  const double per_k = m.r * std::log1p(-m.p) + std::log(m.q);

  LogSumAccumulator acc;
  double last = kNegInf, prev = kNegInf;
  for (std::uint64_t k = parts; k <= k_max; ++k) {
    const double term = fixed + static_cast<double>(k) * per_k + log_falling_factorial(k, parts) +
                        log_rising_factorial(m.a, k) - log_factorial(k);
    acc.add(term);
    prev = last;
    last = term;
  }
  // successive term ratios decrease towards q (1 - p)^r, so the last ratio
  // bounds the remaining geometric tail
  const double log_ratio = last - prev;
  const double total = acc.value();
  const bool tail_ok = prev != kNegInf && log_ratio < 0.0 &&
                       last + log_ratio - log1m_exp(log_ratio) - total < std::log(1e-12);
  if (!tail_ok) {
    std::ostringstream msg;
    msg << "nbnb_log_prob_bruteforce: series not converged at k_max = " << k_max
        << " (last log-term " << last << ", partial log-sum " << total << ")";
    throw ConvergenceError(msg.str());
  }
  return total;
}

namespace {

// log sum_{k >= first} exp(term(k)) for a unimodal-then-decaying sequence;
// stops once terms are past their peak and below 1e-17 of the sum.
template <class Term>
double sum_count_series(std::uint64_t first, Term term, const char *who) {
  constexpr std::uint64_t cap = 10'000'000;
  LogSumAccumulator acc;
  double prev = kNegInf;
  for (std::uint64_t k = first; k < first + cap; ++k) {
    const double t = term(k);
    acc.add(t);
    if (t < prev && t - acc.value() < std::log(1e-17))
      return acc.value();
    prev = t;
  }
  throw ConvergenceError(std::string(who) + ": series over the cluster count did not converge");
}

} // namespace

double nbnb_log_prob_size(const NBNBParams &m, std::uint64_t n) {
  validate(m);
  if (n == 0)
    return m.a * std::log1p(-m.q) - m.a * log1m_exp(m.log_q_survival());
  const double fixed = m.a * std::log1p(-m.q) + static_cast<double>(n) * std::log(m.p) - log_factorial(n);
  const double log_q = std::log(m.q), log_1mp = std::log1p(-m.p);
  return sum_count_series(
      1,
      [&](std::uint64_t k) {
        const double kd = static_cast<double>(k);
        return fixed + log_rising_factorial(m.a, k) - log_factorial(k) + kd * log_q +
               log_rising_factorial(kd * m.r, n) + kd * m.r * log_1mp;
      },
      "nbnb_log_prob_size");
}

double nbnb_log_weight_conditional(const NBNBParams &m, const SizeProfile &profile) {
  validate(m);
  if (profile.n == 0)
    throw std::invalid_argument("nbnb_log_weight_conditional: the empty partition has no conditional law");
  return log_rising_factorial(m.a, profile.num_parts) + static_cast<double>(profile.num_parts) * m.log_beta() +
         sum_log_rising(profile, m.r, 0);
}

double nbnb_log_weight_conditional(const NBNBParams &m, const Partition &part) {
  return nbnb_log_weight_conditional(m, part.profile());
}

// ---------------------------------------------------------------------------
// PERPS

double perps_log_prob_joint(const PERPSParams &m, const SizeProfile &profile) {
  validate(m);
  const auto n = static_cast<double>(profile.n);
  const auto k = static_cast<double>(profile.num_parts);
  return n * std::log(m.lambda) - log_factorial(profile.n) + k * std::log(m.alpha) - m.alpha - m.lambda * k +
         m.alpha * std::exp(-m.lambda);
}

double perps_log_prob_joint(const PERPSParams &m, const Partition &part) {
  return perps_log_prob_joint(m, part.profile());
}

double perps_log_prob_size(const PERPSParams &m, std::uint64_t n) {
  validate(m);
  if (n == 0)
    return -m.alpha + m.alpha * std::exp(-m.lambda);
  const double nd = static_cast<double>(n);
  const double log_alpha = std::log(m.alpha), log_lambda = std::log(m.lambda);
  return sum_count_series(
      1,
      [&](std::uint64_t k) {
        const double kd = static_cast<double>(k);
        return kd * log_alpha - m.alpha - log_factorial(k) + nd * (std::log(kd) + log_lambda) - kd * m.lambda -
               log_factorial(n);
      },
      "perps_log_prob_size");
}

double perps_log_weight_conditional(const PERPSParams &m, const SizeProfile &profile) {
  validate(m);
  if (profile.n == 0)
    throw std::invalid_argument("perps_log_weight_conditional: the empty partition has no conditional law");
  return static_cast<double>(profile.num_parts) * (std::log(m.alpha) - m.lambda);
}

// ---------------------------------------------------------------------------
// DP / PYP

double dp_log_eppf(const DPParams &m, const SizeProfile &profile) {
  validate(m);
  if (profile.n == 0)
    throw std::invalid_argument("dp_log_eppf: requires at least one element");
  return static_cast<double>(profile.num_parts) * std::log(m.theta) - log_rising_factorial(m.theta, profile.n) +
         sum_log_rising(profile, 1.0, 1);
}

double dp_log_eppf(const DPParams &m, const Partition &part) { return dp_log_eppf(m, part.profile()); }

double pyp_log_eppf(const PYPParams &m, const SizeProfile &profile) {
  validate(m);
  if (profile.n == 0)
    throw std::invalid_argument("pyp_log_eppf: requires at least one element");
  if (m.delta == 0.0)
    return dp_log_eppf(DPParams{m.theta}, profile);
  double s = 0.0;
  for (std::size_t k = 1; k < profile.num_parts; ++k)
    s += std::log(m.theta + static_cast<double>(k) * m.delta);
  return s - log_rising_factorial(m.theta + 1.0, profile.n - 1) + sum_log_rising(profile, 1.0 - m.delta, 1);
}

double pyp_log_eppf(const PYPParams &m, const Partition &part) { return pyp_log_eppf(m, part.profile()); }

// ---------------------------------------------------------------------------
// MFM

double mfm_log_v(const MFMParams &m, std::uint64_t n, std::uint64_t t) {
  validate(m);
  if (t == 0)
    return n == 0 ? 0.0 : kNegInf;
  if (t > n)
    return kNegInf;

  auto log_term = [&](std::uint64_t k) {
    const double lp = m.k_prior.log_pmf(k);
    if (lp == kNegInf)
      return kNegInf;
    return log_falling_factorial(k, t) - log_rising_factorial(m.gamma * static_cast<double>(k), n) + lp;
  };
  if (m.k_prior.kind() == KPrior::Kind::point_mass) {
    const auto k = static_cast<std::uint64_t>(m.k_prior.parameter());
    return k < t ? kNegInf : log_term(k);
  }
  auto increasing_at = [&](std::uint64_t k) { return log_term(k + 1) > log_term(k); };

  // locate the largest term: exponential search then bisection
  std::uint64_t peak = t;
  if (increasing_at(t)) {
    std::uint64_t lo = t, step = 1, hi = t + 1;
    while (increasing_at(hi)) {
      lo = hi;
      step *= 2;
      hi = lo + step;
      if (hi - t > kMfmSeriesTermCap)
        throw ConvergenceError("mfm_log_v: series still increasing after the term cap");
    }
    while (hi - lo > 1) {
      const std::uint64_t mid = lo + (hi - lo) / 2;
      if (increasing_at(mid))
        lo = mid;
      else
        hi = mid;
    }
    peak = hi;
  }

  const double log_tol = std::log(m.tolerance);
  // Past the peak the term ratio is at most max(current ratio, prior's own
  // tail ratio), so the rest of the series is below lt R / (1 - R).
  const double prior_ratio = m.k_prior.kind() == KPrior::Kind::geometric ? 1.0 - m.k_prior.parameter() : 0.0;
  LogSumAccumulator acc;
  std::uint64_t terms = 0;
  double prev = kNegInf;
  for (std::uint64_t k = peak;; ++k) {
    const double lt = log_term(k);
    acc.add(lt);
    const double total = acc.value();
    if (total != kNegInf && lt < prev) {
      const double ratio = std::max(std::exp(lt - prev), prior_ratio);
      if (lt - std::log1p(-ratio) < log_tol + total)
        break;
    }
    prev = lt;
    if (++terms > kMfmSeriesTermCap)
      throw ConvergenceError("mfm_log_v: series did not converge within the term cap");
  }
  // below the peak the terms increase with k, so k - t of them bound the rest
  for (std::uint64_t k = peak; k-- > t;) {
    const double lt = log_term(k);
    acc.add(lt);
    if (lt + std::log(static_cast<double>(k - t + 1)) < log_tol + acc.value())
      break;
    if (++terms > kMfmSeriesTermCap)
      throw ConvergenceError("mfm_log_v: series did not converge within the term cap");
  }
  return acc.value();
}

MfmVSeries::MfmVSeries(MFMParams params) : params_(std::move(params)) { validate(params_); }

double MfmVSeries::log_v(std::uint64_t n, std::uint64_t t) const {
  {
    std::lock_guard lock(mutex_);
    auto it = cache_.find({n, t});
    if (it != cache_.end())
      return it->second;
  }
  const double v = mfm_log_v(params_, n, t);
  std::lock_guard lock(mutex_);
  cache_.emplace(std::make_pair(n, t), v);
  return v;
}

double mfm_log_eppf(const MfmVSeries &series, const SizeProfile &profile) {
  if (profile.n == 0)
    throw std::invalid_argument("mfm_log_eppf: requires at least one element");
  const double lv = series.log_v(profile.n, profile.num_parts);
  if (lv == kNegInf)
    return kNegInf;
  return lv + sum_log_rising(profile, series.params().gamma, 0);
}

double mfm_log_eppf(const MFMParams &m, const SizeProfile &profile) {
  validate(m);
  if (profile.n == 0)
    throw std::invalid_argument("mfm_log_eppf: requires at least one element");
  const double lv = mfm_log_v(m, profile.n, profile.num_parts);
  if (lv == kNegInf)
    return kNegInf;
  return lv + sum_log_rising(profile, m.gamma, 0);
}

double mfm_log_eppf(const MFMParams &m, const Partition &part) { return mfm_log_eppf(m, part.profile()); }

// ---------------------------------------------------------------------------

double log_likelihood(const ModelParams &params, const SizeProfile &profile) {
  return std::visit(
      [&](const auto &m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NBNBParams>)
          return nbnb_log_prob_joint(m, profile);
        else if constexpr (std::is_same_v<T, PERPSParams>)
          return perps_log_prob_joint(m, profile);
        else if constexpr (std::is_same_v<T, DPParams>)
          return dp_log_eppf(m, profile);
        else if constexpr (std::is_same_v<T, PYPParams>)
          return pyp_log_eppf(m, profile);
        else
          return mfm_log_eppf(m, profile);
      },
      params);
}

ConditionalLaw::ConditionalLaw(ModelParams params) : params_(std::move(params)) {
  validate(params_);
  if (const auto *m = std::get_if<MFMParams>(&params_))
    mfm_ = std::make_shared<const MfmVSeries>(*m);
}

double ConditionalLaw::log_weight(const SizeProfile &profile) const {
  return std::visit(
      [&](const auto &m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NBNBParams>)
          return nbnb_log_weight_conditional(m, profile);
        else if constexpr (std::is_same_v<T, PERPSParams>)
          return perps_log_weight_conditional(m, profile);
        else if constexpr (std::is_same_v<T, DPParams>)
          return dp_log_eppf(m, profile);
        else if constexpr (std::is_same_v<T, PYPParams>)
          return pyp_log_eppf(m, profile);
        else
          return mfm_log_eppf(*mfm_, profile);
      },
      params_);
}

double ConditionalLaw::log_prob(const SizeProfile &profile) const {
  return std::visit(
      [&](const auto &m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NBNBParams>)
          return nbnb_log_prob_joint(m, profile) - nbnb_log_prob_size(m, profile.n);
        else if constexpr (std::is_same_v<T, PERPSParams>)
          return perps_log_prob_joint(m, profile) - perps_log_prob_size(m, profile.n);
        else
          return log_weight(profile);
      },
      params_);
}

// ---------------------------------------------------------------------------
// reseating

ReseatRule::ReseatRule(double size_coef, double offset, std::function<double(std::size_t)> log_new)
    : size_coef_(size_coef), offset_(offset), log_new_(std::move(log_new)) {
  if (size_coef_ < 0.0 || size_coef_ + offset_ <= 0.0)
    throw std::domain_error("ReseatRule: existing-cluster weights must be positive");
}

void ReseatRule::set_linear_new_weight(double slope, double intercept) {
  // underflowed or overflowed coefficients stay on the log-space path
  auto ok = [](double v) { return v == 0.0 || (std::isnormal(v) && v > 0.0 && v < 1e300); };
  linear_new_ = ok(slope) && ok(intercept) && slope + intercept > 0.0;
  new_slope_ = slope;
  new_intercept_ = intercept;
}

ReseatRule make_reseat_rule(const ModelParams &params, std::size_t n) {
  validate(params);
  return std::visit(
      [n](const auto &m) -> ReseatRule {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NBNBParams>) {
          const double log_beta_r = m.log_beta() + std::log(m.r);
          const double a = m.a;
          ReseatRule rule(1.0, m.r, [=](std::size_t k) { return std::log(static_cast<double>(k) + a) + log_beta_r; });
          const double beta_r = std::exp(log_beta_r);
          rule.set_linear_new_weight(beta_r, a * beta_r);
          return rule;
        } else if constexpr (std::is_same_v<T, PERPSParams>) {
          const double log_new = std::log(m.alpha) - m.lambda;
          ReseatRule rule(0.0, 1.0, [=](std::size_t) { return log_new; });
          rule.set_linear_new_weight(0.0, std::exp(log_new));
          return rule;
        } else if constexpr (std::is_same_v<T, DPParams>) {
          const double log_theta = std::log(m.theta);
          ReseatRule rule(1.0, 0.0, [=](std::size_t) { return log_theta; });
          rule.set_linear_new_weight(0.0, m.theta);
          return rule;
        } else if constexpr (std::is_same_v<T, PYPParams>) {
          const double theta = m.theta, delta = m.delta;
          ReseatRule rule(1.0, -delta, [=](std::size_t k) { return std::log(theta + static_cast<double>(k) * delta); });
          // theta may be negative, so only the log path is safe then
          if (theta > 0.0)
            rule.set_linear_new_weight(delta, theta);
          return rule;
        } else {
          auto series = std::make_shared<const MfmVSeries>(m);
          const double log_gamma = std::log(m.gamma);
          return ReseatRule(1.0, m.gamma, [=](std::size_t k) {
            return log_gamma + series->log_v(n, k + 1) - series->log_v(n, k);
          });
        }
      },
      params);
}

ReseatWeights reseating_weights(const ReseatRule &rule, std::span<const std::size_t> remaining_sizes) {
  ReseatWeights w;
  w.existing.reserve(remaining_sizes.size());
  for (std::size_t s : remaining_sizes)
    w.existing.push_back(rule.existing_weight(s));
  w.new_cluster = std::exp(rule.log_new_weight(remaining_sizes.size()));
  return w;
}

} // namespace microclust
