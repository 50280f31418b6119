#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caps/core.hpp"

namespace caps {

/// Exact filtered top-k for one query: ids with double-precision scores,
/// ascending by (score, id). Every id satisfies the query filter.
struct GroundTruthRow {
  std::vector<uint32_t> ids;
  std::vector<double> scores;
};

/// Slow exact search: scans all rows, filters, keeps the k best by
/// (distance, id). Double precision throughout.
GroundTruthRow ground_truth(const EmbeddingMatrix& vectors,
                            const AttributeTable& attrs, const float* q,
                            const QueryFilter& f, uint32_t k, Metric metric);

/// Batch form, parallel over queries.
std::vector<GroundTruthRow> ground_truth_batch(
    const EmbeddingMatrix& vectors, const AttributeTable& attrs,
    const EmbeddingMatrix& queries, std::span<const QueryFilter> filters,
    uint32_t k, Metric metric);

enum class RecallDenominator {
  K,          // divide by k even when the truth has fewer ids (default)
  TruthSize,  // divide by |truth|
};

/// |retrieved ∩ truth| / k (or / |truth| in the alternate mode).
double recall_at_k(std::span<const uint32_t> retrieved,
                   std::span<const uint32_t> truth, uint32_t k,
                   RecallDenominator denom = RecallDenominator::K);

// Ground-truth cache file, keyed so stale caches are never silently reused.

uint64_t ground_truth_key(const EmbeddingMatrix& vectors,
                          const AttributeTable& attrs,
                          const EmbeddingMatrix& queries,
                          std::span<const QueryFilter> filters, uint32_t k,
                          Metric metric);

void save_ground_truth(const std::string& path,
                       std::span<const GroundTruthRow> rows, uint64_t key,
                       uint32_t k);

/// nullopt when the file does not exist or was written for another key/k;
/// throws IoError on a corrupt or truncated file.
std::optional<std::vector<GroundTruthRow>> load_ground_truth(
    const std::string& path, uint64_t expected_key, uint32_t k);

}  // namespace caps
