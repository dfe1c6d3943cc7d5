#include "microclust/cluster_state.hpp"

#include <algorithm>
#include <cassert>

namespace microclust {

ClusterState::ClusterState(const Partition &init)
    : cluster_of_(init.size()), pos_in_cluster_(init.size()), members_(init.num_parts()),
      active_(init.num_parts()), active_pos_(init.num_parts()) {
  for (std::uint32_t c = 0; c < init.num_parts(); ++c) {
    active_[c] = c;
    active_pos_[c] = c;
    members_[c].reserve(init.sizes()[c]);
  }
  for (std::size_t e = 0; e < init.size(); ++e) {
    const std::uint32_t c = init.label(e) - 1;
    cluster_of_[e] = c;
    pos_in_cluster_[e] = static_cast<std::uint32_t>(members_[c].size());
    members_[c].push_back(static_cast<std::uint32_t>(e));
  }
}

void ClusterState::remove(std::size_t element) {
  const std::uint32_t c = cluster_of_[element];
  assert(c != kUnassigned);
  auto &mem = members_[c];
  const std::uint32_t pos = pos_in_cluster_[element];
  const std::uint32_t moved = mem.back();
  mem[pos] = moved;
  pos_in_cluster_[moved] = pos;
  mem.pop_back();
  cluster_of_[element] = kUnassigned;

  if (mem.empty()) {
    const std::uint32_t ap = active_pos_[c];
    const std::uint32_t last = active_.back();
    active_[ap] = last;
    active_pos_[last] = ap;
    active_.pop_back();
    free_.push_back(c);
  }
}

void ClusterState::assign(std::size_t element, std::uint32_t slot) {
  assert(cluster_of_[element] == kUnassigned);
  auto &mem = members_[slot];
  if (mem.empty()) {
    // re-activating a released slot
    auto it = std::find(free_.begin(), free_.end(), slot);
    assert(it != free_.end());
    *it = free_.back();
    free_.pop_back();
    active_pos_[slot] = static_cast<std::uint32_t>(active_.size());
    active_.push_back(slot);
  }
  cluster_of_[element] = slot;
  pos_in_cluster_[element] = static_cast<std::uint32_t>(mem.size());
  mem.push_back(static_cast<std::uint32_t>(element));
}

std::uint32_t ClusterState::assign_new(std::size_t element) {
  std::uint32_t slot;
  if (!free_.empty()) {
    slot = free_.back();
    free_.pop_back();
  } else {
    slot = static_cast<std::uint32_t>(members_.size());
    members_.emplace_back();
    active_pos_.push_back(0);
  }
  active_pos_[slot] = static_cast<std::uint32_t>(active_.size());
  active_.push_back(slot);
  cluster_of_[element] = slot;
  pos_in_cluster_[element] = 0;
  members_[slot].push_back(static_cast<std::uint32_t>(element));
  return slot;
}

std::size_t ClusterState::max_cluster_size() const {
  std::size_t m = 0;
  for (std::uint32_t c : active_)
    m = std::max(m, members_[c].size());
  return m;
}

Partition ClusterState::to_partition() const {
  return Partition::from_canonical_or_raw(cluster_of_);
}

} // namespace microclust
