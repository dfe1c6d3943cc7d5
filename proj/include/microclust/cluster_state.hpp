#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "microclust/partition.hpp"

namespace microclust {

// Mutable cluster bookkeeping for MCMC: per-cluster member lists, a dense
// list of occupied cluster slots, and O(1) removal/insertion of elements.
// Slot ids are recycled and are not canonical labels; use to_partition().
class ClusterState {
public:
  static constexpr std::uint32_t kUnassigned = std::numeric_limits<std::uint32_t>::max();

  explicit ClusterState(const Partition &init);

  std::size_t size() const { return cluster_of_.size(); }
  std::size_t num_clusters() const { return active_.size(); }

  std::uint32_t cluster_of(std::size_t element) const { return cluster_of_[element]; }
  std::size_t cluster_size(std::uint32_t slot) const { return members_[slot].size(); }
  std::span<const std::uint32_t> members(std::uint32_t slot) const { return members_[slot]; }
  std::span<const std::uint32_t> active_clusters() const { return active_; }

  // Detaches an element; its cluster is released once empty.
  void remove(std::size_t element);
  void assign(std::size_t element, std::uint32_t slot);
  std::uint32_t assign_new(std::size_t element);

  std::size_t max_cluster_size() const;
  Partition to_partition() const;

private:
  std::vector<std::uint32_t> cluster_of_;
  std::vector<std::uint32_t> pos_in_cluster_;
  std::vector<std::vector<std::uint32_t>> members_;
  std::vector<std::uint32_t> active_;
  std::vector<std::uint32_t> active_pos_;
  std::vector<std::uint32_t> free_;
};

} // namespace microclust
