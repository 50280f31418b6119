#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "caps/core.hpp"

namespace caps {

struct KMeansConfig {
  uint32_t iters = 15;
  uint64_t seed = 42;
  Metric metric = Metric::SquaredEuclidean;
  // Max points per partition during the build-time assignment pass.
  // nullopt with balanced=true means the default cap ceil(1.25 * n / b).
  std::optional<uint32_t> balance_cap;
  bool balanced = true;
};

/// First-level embedding-space partition function: B centroids plus the
/// assignment and top-m probing rules. Immutable once trained.
class PartitionModel {
 public:
  PartitionModel() = default;
  PartitionModel(uint32_t b, uint32_t d, Metric metric,
                 std::vector<float> centroids,
                 std::optional<uint32_t> balance_cap)
      : b_(b), d_(d), metric_(metric), centroids_(std::move(centroids)),
        balance_cap_(balance_cap) {
    if (centroids_.size() != static_cast<size_t>(b) * d)
      throw InvalidArgument("PartitionModel: centroid buffer size mismatch");
  }

  uint32_t partition_count() const { return b_; }
  uint32_t dim() const { return d_; }
  Metric metric() const { return metric_; }
  std::optional<uint32_t> balance_cap() const { return balance_cap_; }
  const float* centroid(uint32_t i) const {
    return centroids_.data() + static_cast<size_t>(i) * d_;
  }
  const std::vector<float>& centroids() const { return centroids_; }

  /// Pure nearest-centroid id; ties break to the lowest id.
  uint32_t assign(const float* x) const;
  uint32_t assign(std::span<const float> x) const;

  /// The m nearest centroid ids, ascending by (distance, id). Full centroid
  /// scan feeding a bounded selection heap of size m.
  std::vector<uint32_t> top_m(const float* q, uint32_t m) const;

 private:
  uint32_t b_ = 0;
  uint32_t d_ = 0;
  Metric metric_ = Metric::SquaredEuclidean;
  std::vector<float> centroids_;
  std::optional<uint32_t> balance_cap_;
};

/// Seeded greedy-spread initialization followed by Lloyd iterations.
/// Empty clusters are re-seeded from the largest cluster's farthest point.
/// Deterministic for a fixed seed regardless of thread count.
/// objective_log, when given, receives the Lloyd objective after each
/// assignment step.
PartitionModel train(const EmbeddingMatrix& vectors, uint32_t b,
                     const KMeansConfig& config,
                     std::vector<double>* objective_log = nullptr);

/// Build-time whole-dataset assignment. With a balance cap, fills partitions
/// greedily by ascending point-to-centroid distance and spills to the
/// next-nearest non-full centroid; otherwise plain nearest-centroid.
std::vector<uint32_t> assign_all(const PartitionModel& model,
                                 const EmbeddingMatrix& vectors);

}  // namespace caps
