#include "caps/aft.hpp"

#include <algorithm>

namespace caps {

size_t Aft::member_count() const {
  size_t total = remainder_.size();
  for (const auto& leaf : leaves_) total += leaf.members.size();
  return total;
}

Aft Aft::build(std::span<const uint32_t> members, const AttributeTable& attrs,
               uint32_t h) {
  Aft aft;
  const size_t l = attrs.attr_count();
  std::vector<uint32_t> remaining(members.begin(), members.end());

  std::unordered_map<uint64_t, uint32_t> counts;
  for (uint32_t step = 0; step < h && !remaining.empty(); ++step) {
    counts.clear();
    for (uint32_t id : remaining) {
      const uint32_t* row = attrs.row(id);
      for (size_t p = 0; p < l; ++p)
        ++counts[AttrTag{static_cast<uint32_t>(p), row[p]}.key()];
    }

    // Argmax by count; ties go to the lowest position, then lowest value.
    AttrTag best{};
    uint32_t best_count = 0;
    for (const auto& [key, count] : counts) {
      AttrTag tag{static_cast<uint32_t>(key >> 32),
                  static_cast<uint32_t>(key & 0xFFFFFFFFu)};
      if (count > best_count ||
          (count == best_count &&
           (tag.position < best.position ||
            (tag.position == best.position && tag.value < best.value)))) {
        best = tag;
        best_count = count;
      }
    }
    // Singleton tags are never peeled; a one-member leaf wastes a hash slot.
    if (best_count < 2) break;

    Leaf leaf;
    leaf.tag = best;
    leaf.members.reserve(best_count);
    std::vector<uint32_t> kept;
    kept.reserve(remaining.size() - best_count);
    for (uint32_t id : remaining) {
      if (attrs.row(id)[best.position] == best.value)
        leaf.members.push_back(id);
      else
        kept.push_back(id);
    }
    remaining.swap(kept);
    aft.tag_lookup_.emplace(best.key(), static_cast<uint32_t>(aft.leaves_.size()));
    aft.leaves_.push_back(std::move(leaf));
  }

  aft.remainder_ = std::move(remaining);
  return aft;
}

SubPartitionSelection Aft::lookup(const QueryFilter& f) const {
  SubPartitionSelection sel;
  for (size_t p = 0; p < f.pattern.size(); ++p) {
    uint32_t want = f.pattern[p];
    if (want == kWildcard) continue;
    auto it = tag_lookup_.find(AttrTag{static_cast<uint32_t>(p), want}.key());
    if (it != tag_lookup_.end()) sel.leaf_indices.push_back(it->second);
  }
  if (sel.leaf_indices.empty()) {
    sel.include_remainder = true;
  } else {
    std::sort(sel.leaf_indices.begin(), sel.leaf_indices.end());
  }
  return sel;
}

uint32_t Aft::route(std::span<const uint32_t> attr_row) const {
  for (size_t j = 0; j < leaves_.size(); ++j) {
    const AttrTag& tag = leaves_[j].tag;
    if (attr_row[tag.position] == tag.value) return static_cast<uint32_t>(j);
  }
  return static_cast<uint32_t>(leaves_.size());
}

Aft Aft::from_parts(std::vector<Leaf> leaves, std::vector<uint32_t> remainder) {
  Aft aft;
  aft.leaves_ = std::move(leaves);
  aft.remainder_ = std::move(remainder);
  for (size_t j = 0; j < aft.leaves_.size(); ++j)
    aft.tag_lookup_.emplace(aft.leaves_[j].tag.key(), static_cast<uint32_t>(j));
  return aft;
}

}  // namespace caps
