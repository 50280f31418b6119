#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "caps/aft.hpp"
#include "caps/core.hpp"
#include "caps/partitioner.hpp"

namespace caps {

struct CapsConfig {
  uint32_t b = 0;  // 0 = default: ceil(sqrt(n)) rounded to a power of two
  uint32_t h = 3;
  Metric metric = Metric::SquaredEuclidean;
  KMeansConfig kmeans;
};

struct SearchStats {
  uint64_t candidates_scanned = 0;
  uint64_t filter_passes = 0;
  uint64_t distance_computations = 0;
};

struct SearchResult {
  std::vector<uint32_t> ids;   // up to k, ascending by (score, id)
  std::vector<float> scores;
  SearchStats stats;
};

struct SearchOptions {
  // Scan every leaf plus the remainder of each probed partition instead of
  // the hashed selection. With m = B this matches the exact oracle.
  bool exhaustive_subpartitions = false;
  // Distance-first scan of whole partitions with the filter applied after
  // (classic IVF post-filtering). Baseline mode for the harness.
  bool postfilter = false;
  // Test hook: collects every candidate id the scan touched.
  std::vector<uint32_t>* candidates_out = nullptr;
};

/// Two-level filtered search index: balanced k-means partitions, each
/// subdivided by an Attribute Frequency Tree of height h.
class CapsIndex {
 public:
  static CapsIndex build(EmbeddingMatrix vectors, AttributeTable attrs,
                         const CapsConfig& config);

  SearchResult search(std::span<const float> q, const QueryFilter& f,
                      uint32_t k, uint32_t m,
                      const SearchOptions& opts = {}) const;

  /// Appends one point: nearest-centroid partition, earliest tag-matching
  /// leaf (else remainder). Centroids and tags are not retrained.
  /// Single writer; no concurrent readers during the call.
  uint32_t insert(std::span<const float> x, std::span<const uint32_t> a);

  void save(const std::string& path, bool include_data = true) const;
  static CapsIndex load(const std::string& path);
  static CapsIndex load(const std::string& path, EmbeddingMatrix vectors,
                        AttributeTable attrs);

  size_t size() const { return vectors_.size(); }
  size_t dim() const { return vectors_.dim(); }
  size_t attr_count() const { return attrs_.attr_count(); }
  uint32_t partition_count() const { return model_.partition_count(); }
  uint32_t height() const { return h_; }
  Metric metric() const { return metric_; }
  uint32_t attr_precision_bytes() const { return r_; }

  const PartitionModel& model() const { return model_; }
  const Aft& aft(uint32_t partition) const { return afts_[partition]; }
  const EmbeddingMatrix& vectors() const { return vectors_; }
  const AttributeTable& attrs() const { return attrs_; }

  /// Serialized byte count excluding the fixed header and the optional
  /// embedded dataset blocks: 4Bd + 4B(h+1) + 4N + 2B(h+1)r.
  uint64_t serialized_overhead_bytes() const;

  /// All B*(h+1) sub-partition sizes, partition-major; absent leaves are 0,
  /// the remainder sits at slot h.
  std::vector<uint64_t> subpartition_sizes() const;

  /// Structural invariant audit (disjoint cover, leaf purity, leaf
  /// exclusion). Throws DataError on violation.
  void audit_invariants() const;

  static constexpr uint32_t kFormatVersion = 1;
  static constexpr size_t kHeaderBytes = 64;

 private:
  CapsIndex() = default;
  static CapsIndex load_impl(const std::string& path, EmbeddingMatrix* vectors,
                             AttributeTable* attrs);

  PartitionModel model_;
  std::vector<Aft> afts_;
  EmbeddingMatrix vectors_;
  AttributeTable attrs_;
  uint32_t h_ = 0;
  Metric metric_ = Metric::SquaredEuclidean;
  uint32_t r_ = 1;
};

/// Default partition count: ceil(sqrt(n)) rounded to the nearest power of
/// two (never above n).
uint32_t default_partition_count(size_t n);

}  // namespace caps
