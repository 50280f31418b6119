#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "caps/core.hpp"

namespace caps {

/// (attribute position, value) pair labelling one AFT leaf.
struct AttrTag {
  uint32_t position = 0;
  uint32_t value = 0;

  uint64_t key() const {
    return (static_cast<uint64_t>(position) << 32) | value;
  }
  bool operator==(const AttrTag&) const = default;
};

/// Which sub-partitions of one partition a filter selects.
struct SubPartitionSelection {
  std::vector<uint32_t> leaf_indices;  // ascending
  bool include_remainder = false;
};

/// Truncated Attribute Frequency Tree for one partition: up to h tagged
/// leaves in split order plus a remainder, with a hash for O(1) tag->leaf
/// probes. Leaves and remainder partition the input member set.
class Aft {
 public:
  struct Leaf {
    AttrTag tag;
    std::vector<uint32_t> members;
  };

  /// Greedy frequency peeling: at each of up to h steps, the (position,
  /// value) pair with the highest count over the remaining members (ties:
  /// lowest position, then lowest value) becomes a leaf tag and its members
  /// are peeled. Stops early when the remaining set empties or no pair
  /// occurs twice. Leftovers form the remainder.
  static Aft build(std::span<const uint32_t> members, const AttributeTable& attrs,
                   uint32_t h);

  /// Hash probe per non-wildcard filter position; O(L), independent of h.
  /// No probe hits => the remainder is selected (and nothing else).
  SubPartitionSelection lookup(const QueryFilter& f) const;

  /// Index of the earliest leaf whose tag the attribute row contains, or
  /// leaf_count() for the remainder. Insert routing.
  uint32_t route(std::span<const uint32_t> attr_row) const;

  const std::vector<Leaf>& leaves() const { return leaves_; }
  std::vector<Leaf>& leaves() { return leaves_; }
  const std::vector<uint32_t>& remainder() const { return remainder_; }
  std::vector<uint32_t>& remainder() { return remainder_; }
  size_t leaf_count() const { return leaves_.size(); }
  size_t member_count() const;

  /// Rebuild from deserialized parts.
  static Aft from_parts(std::vector<Leaf> leaves, std::vector<uint32_t> remainder);

 private:
  std::vector<Leaf> leaves_;
  std::vector<uint32_t> remainder_;
  std::unordered_map<uint64_t, uint32_t> tag_lookup_;
};

}  // namespace caps
