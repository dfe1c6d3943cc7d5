#include "microclust/enumerate.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace microclust {

PartitionEnumerator::PartitionEnumerator(std::size_t n) : n_(n), rgs_(n, 0), prefix_max_(n, 0) {
  if (n > kMaxEnumerationSize)
    throw std::length_error("enumerate_partitions: n = " + std::to_string(n) +
                            " exceeds the enumeration limit of " +
                            std::to_string(kMaxEnumerationSize));
}

bool PartitionEnumerator::advance() {
  // rightmost position that can still grow; positions after it reset to 0
  for (std::size_t i = n_; i-- > 1;) {
    if (rgs_[i] <= prefix_max_[i - 1]) {
      ++rgs_[i];
      prefix_max_[i] = std::max(prefix_max_[i - 1], rgs_[i]);
      for (std::size_t j = i + 1; j < n_; ++j) {
        rgs_[j] = 0;
        prefix_max_[j] = prefix_max_[i];
      }
      return true;
    }
  }
  return false;
}

bool PartitionEnumerator::next(Partition &out) {
  if (done_)
    return false;
  if (started_ && !advance()) {
    done_ = true;
    return false;
  }
  started_ = true;
  std::vector<std::uint32_t> labels(n_);
  for (std::size_t i = 0; i < n_; ++i)
    labels[i] = rgs_[i] + 1;
  out = Partition::from_canonical_or_raw(std::move(labels));
  return true;
}

void for_each_partition(std::size_t n, const std::function<void(const Partition &)> &fn) {
  PartitionEnumerator it(n);
  Partition p;
  while (it.next(p))
    fn(p);
}

std::vector<Partition> enumerate_partitions(std::size_t n) {
  std::vector<Partition> out;
  for_each_partition(n, [&](const Partition &p) { out.push_back(p); });
  return out;
}

} // namespace microclust
