#include "microclust/combinatorics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace microclust {

namespace {

// Below this length the product is summed term by term; lgamma differences
// lose absolute precision when x is large and m small.
constexpr std::uint64_t kDirectProductLimit = 32;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

} // namespace

double log_rising_factorial(double x, std::uint64_t m) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw std::domain_error("log_rising_factorial: x must be positive and finite");
  if (m == 0)
    return 0.0;
  if (m <= kDirectProductLimit) {
    double s = 0.0;
    for (std::uint64_t i = 0; i < m; ++i)
      s += std::log(x + static_cast<double>(i));
    return s;
  }
  const double md = static_cast<double>(m);
  if (x >= 1000.0) {
    // Stirling difference; the lgamma difference would cancel badly once
    // lgamma(x) dwarfs the result
    auto corr = [](double y) {
      const double y2 = y * y;
      return (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / (1260.0 * y2)) / y2) / y;
    };
    return (x - 0.5) * std::log1p(md / x) + md * std::log(x + md) - md + (corr(x + md) - corr(x));
  }
  return std::lgamma(x + md) - std::lgamma(x);
}

double log_falling_factorial(std::uint64_t k, std::uint64_t t) {
  if (t > k)
    return kNegInf;
  if (t == 0)
    return 0.0;
  return log_rising_factorial(static_cast<double>(k - t) + 1.0, t);
}

double log_factorial(std::uint64_t n) {
  return std::lgamma(static_cast<double>(n) + 1.0);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty())
    return kNegInf;
  const double mx = *std::max_element(values.begin(), values.end());
  if (mx == kNegInf)
    return kNegInf;
  if (mx == std::numeric_limits<double>::infinity())
    return mx;
  double s = 0.0;
  for (double v : values)
    s += std::exp(v - mx);
  return mx + std::log(s);
}

double log_add(double a, double b) {
  if (a < b)
    std::swap(a, b);
  if (b == kNegInf)
    return a;
  return a + std::log1p(std::exp(b - a));
}

void LogSumAccumulator::add(double log_term) {
  ++count_;
  if (log_term == kNegInf)
    return;
  if (log_term > shift_) {
    // rescale what we have to the new reference point
    const double scale = std::exp(shift_ - log_term);
    sum_ *= scale;
    comp_ *= scale;
    shift_ = log_term;
  }
  // Neumaier summation
  const double v = std::exp(log_term - shift_);
  const double t = sum_ + v;
  if (std::abs(sum_) >= v)
    comp_ += (sum_ - t) + v;
  else
    comp_ += (v - t) + sum_;
  sum_ = t;
}

double LogSumAccumulator::value() const {
  if (shift_ == kNegInf)
    return kNegInf;
  return shift_ + std::log(sum_ + comp_);
}

std::uint64_t bell_number(unsigned n) {
  if (n > 25)
    throw std::overflow_error("bell_number: n > 25 overflows 64 bits");
  std::vector<std::uint64_t> row{1};
  for (unsigned i = 0; i < n; ++i) {
    std::vector<std::uint64_t> next{row.back()};
    next.reserve(row.size() + 1);
    for (std::uint64_t v : row)
      next.push_back(next.back() + v);
    row = std::move(next);
  }
  return row.front();
}

} // namespace microclust
