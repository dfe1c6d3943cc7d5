#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace microclust {

// Size multiset of a partition: (cluster size, number of clusters of that
// size) pairs in ascending size order. Every partition law in this library
// depends on a partition only through this profile.
struct SizeProfile {
  std::size_t n = 0;
  std::size_t num_parts = 0;
  std::vector<std::pair<std::size_t, std::size_t>> counts;

  bool operator==(const SizeProfile &) const = default;
};

// A partition of {1, ..., n} in canonical form: labels are 1-based and
// numbered in order of first appearance, so two partitions are equal iff
// their label vectors are equal.
class Partition {
public:
  Partition() = default;

  // Canonicalizes an arbitrary label vector (already compacted or not).
  static Partition from_canonical_or_raw(std::vector<std::uint32_t> labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t num_parts() const { return sizes_.size(); }
  bool empty() const { return labels_.empty(); }

  std::span<const std::uint32_t> labels() const { return labels_; }
  // sizes()[k] is the size of the cluster labelled k + 1
  std::span<const std::size_t> sizes() const { return sizes_; }
  std::uint32_t label(std::size_t element) const { return labels_[element]; }

  SizeProfile profile() const;
  std::vector<std::size_t> sorted_sizes() const;

  bool operator==(const Partition &other) const { return labels_ == other.labels_; }

private:
  std::vector<std::uint32_t> labels_;
  std::vector<std::size_t> sizes_;
};

template <class Id>
Partition partition_from_labels(std::span<const Id> ids) {
  std::unordered_map<Id, std::uint32_t> seen;
  std::vector<std::uint32_t> labels;
  labels.reserve(ids.size());
  for (const Id &id : ids) {
    auto [it, inserted] = seen.try_emplace(id, static_cast<std::uint32_t>(seen.size() + 1));
    labels.push_back(it->second);
  }
  return Partition::from_canonical_or_raw(std::move(labels));
}

template <class Id>
Partition partition_from_labels(const std::vector<Id> &ids) {
  return partition_from_labels(std::span<const Id>(ids));
}

// Elements are assigned block-wise: the first sizes[0] elements form
// cluster 1, and so on. Zero sizes are rejected.
Partition partition_from_sizes(std::span<const std::size_t> sizes);

Partition all_in_one(std::size_t n);
Partition all_singletons(std::size_t n);

struct PartitionStats {
  std::size_t singletons = 0;
  std::size_t max_size = 0;
  double mean_size = 0.0;
  std::size_t q90 = 0;
};

// Nearest-rank quantile of an ascending sequence: element at rank
// ceil(prob * count), 1-based. The single place the quantile convention for
// cluster sizes is defined.
std::size_t nearest_rank_quantile(std::span<const std::size_t> ascending, double prob);

inline constexpr double kClusterSizeQuantile = 0.9;

// Throws std::invalid_argument for the empty partition.
PartitionStats compute_statistics(const Partition &p);
PartitionStats compute_statistics(const SizeProfile &profile);

} // namespace microclust
