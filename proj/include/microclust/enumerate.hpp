#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "microclust/partition.hpp"

namespace microclust {

inline constexpr std::size_t kMaxEnumerationSize = 12;

// Streams every partition of {1..n} exactly once, in canonical form, by
// walking restricted growth strings in lexicographic order.
// Throws std::length_error for n > kMaxEnumerationSize.
class PartitionEnumerator {
public:
  explicit PartitionEnumerator(std::size_t n);

  // Writes the next partition into `out`; false once exhausted.
  bool next(Partition &out);

private:
  bool advance();

  std::size_t n_;
  std::vector<std::uint32_t> rgs_;  // 0-based restricted growth string
  std::vector<std::uint32_t> prefix_max_;
  bool started_ = false;
  bool done_ = false;
};

void for_each_partition(std::size_t n, const std::function<void(const Partition &)> &fn);

std::vector<Partition> enumerate_partitions(std::size_t n);

} // namespace microclust
