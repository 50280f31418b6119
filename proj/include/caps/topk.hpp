#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

namespace caps {

/// Bounded selection of the k smallest (score, id) pairs.
/// Ties on score break toward the lower id, so selection is a total order.
template <typename Score>
class BoundedTopK {
 public:
  using Entry = std::pair<Score, uint32_t>;

  explicit BoundedTopK(size_t k) : k_(k) { heap_.reserve(k + 1); }

  bool would_accept(Score s) const {
    return heap_.size() < k_ || s < heap_.front().first;
  }

  void push(Score s, uint32_t id) {
    Entry e{s, id};
    if (heap_.size() < k_) {
      heap_.push_back(e);
      std::push_heap(heap_.begin(), heap_.end());
      return;
    }
    if (e < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = e;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  size_t size() const { return heap_.size(); }

  /// Drains the heap into an ascending (score, id) list.
  std::vector<Entry> take_sorted() {
    std::sort_heap(heap_.begin(), heap_.end());
    return std::move(heap_);
  }

 private:
  size_t k_;
  std::vector<Entry> heap_;  // max-heap on (score, id)
};

}  // namespace caps
