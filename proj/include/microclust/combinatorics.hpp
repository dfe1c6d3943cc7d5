#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace microclust {

// log of x^{(m)} = x (x + 1) ... (x + m - 1), with x^{(0)} = 1.
// Throws std::domain_error for x <= 0.
double log_rising_factorial(double x, std::uint64_t m);

// log of k (k - 1) ... (k - t + 1); -inf when t > k.
double log_falling_factorial(std::uint64_t k, std::uint64_t t);

double log_factorial(std::uint64_t n);

// log(sum_i exp(v_i)); -inf for an empty span or all -inf inputs.
double log_sum_exp(std::span<const double> values);

// log(exp(a) + exp(b)).
double log_add(double a, double b);

// Streaming log-space sum. Terms are accumulated relative to the largest
// term seen so far with compensated summation, so long series of tiny
// terms keep full relative precision.
class LogSumAccumulator {
public:
  void add(double log_term);
  double value() const;
  double max_term() const { return shift_; }
  std::uint64_t count() const { return count_; }

private:
  double shift_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
  double comp_ = 0.0;
  std::uint64_t count_ = 0;
};

// Bell numbers via the Bell triangle; exact up to n = 25.
std::uint64_t bell_number(unsigned n);

} // namespace microclust
