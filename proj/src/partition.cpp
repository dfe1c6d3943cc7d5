#include "microclust/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace microclust {

Partition Partition::from_canonical_or_raw(std::vector<std::uint32_t> labels) {
  Partition p;
  std::unordered_map<std::uint32_t, std::uint32_t> remap;
  for (auto &l : labels) {
    auto [it, inserted] = remap.try_emplace(l, static_cast<std::uint32_t>(remap.size() + 1));
    if (inserted)
      p.sizes_.push_back(0);
    l = it->second;
    ++p.sizes_[l - 1];
  }
  p.labels_ = std::move(labels);
  return p;
}

SizeProfile Partition::profile() const {
  std::map<std::size_t, std::size_t> hist;
  for (std::size_t s : sizes_)
    ++hist[s];
  SizeProfile out;
  out.n = labels_.size();
  out.num_parts = sizes_.size();
  out.counts.assign(hist.begin(), hist.end());
  return out;
}

std::vector<std::size_t> Partition::sorted_sizes() const {
  std::vector<std::size_t> s(sizes_.begin(), sizes_.end());
  std::sort(s.begin(), s.end());
  return s;
}

Partition partition_from_sizes(std::span<const std::size_t> sizes) {
  std::vector<std::uint32_t> labels;
  std::uint32_t k = 0;
  for (std::size_t s : sizes) {
    if (s == 0)
      throw std::invalid_argument("partition_from_sizes: cluster sizes must be positive");
    ++k;
    labels.insert(labels.end(), s, k);
  }
  return Partition::from_canonical_or_raw(std::move(labels));
}

Partition all_in_one(std::size_t n) {
  return Partition::from_canonical_or_raw(std::vector<std::uint32_t>(n, 1));
}

Partition all_singletons(std::size_t n) {
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i)
    labels[i] = static_cast<std::uint32_t>(i + 1);
  return Partition::from_canonical_or_raw(std::move(labels));
}

std::size_t nearest_rank_quantile(std::span<const std::size_t> ascending, double prob) {
  if (ascending.empty())
    throw std::invalid_argument("nearest_rank_quantile: empty sequence");
  const double count = static_cast<double>(ascending.size());
  // the epsilon keeps exact products such as 0.9 * 4500 from rounding up
  auto rank = static_cast<std::size_t>(std::ceil(prob * count - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, ascending.size());
  return ascending[rank - 1];
}

PartitionStats compute_statistics(const SizeProfile &profile) {
  if (profile.n == 0)
    throw std::invalid_argument("compute_statistics: statistics are undefined for the empty partition");
  PartitionStats st;
  st.mean_size = static_cast<double>(profile.n) / static_cast<double>(profile.num_parts);
  st.max_size = profile.counts.back().first;
  if (profile.counts.front().first == 1)
    st.singletons = profile.counts.front().second;

  // nearest rank over the ascending size multiset, walked by run length
  const double count = static_cast<double>(profile.num_parts);
  auto rank = static_cast<std::size_t>(std::ceil(kClusterSizeQuantile * count - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, profile.num_parts);
  std::size_t seen = 0;
  for (const auto &[size, mult] : profile.counts) {
    seen += mult;
    if (seen >= rank) {
      st.q90 = size;
      break;
    }
  }
  return st;
}

PartitionStats compute_statistics(const Partition &p) {
  if (p.empty())
    throw std::invalid_argument("compute_statistics: statistics are undefined for the empty partition");
  return compute_statistics(p.profile());
}

} // namespace microclust
