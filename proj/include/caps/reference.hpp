#pragma once

#include <cstdint>
#include <vector>

#include "caps/core.hpp"

namespace caps::ref {

// Serial reference kernels: plain double-precision loops, no unrolling,
// no threading. These are the comparison baseline for the parallel /
// single-precision implementations and stay independent of them.

double l2_sq_f64(const float* x, const float* y, size_t d);
double inner_product_f64(const float* x, const float* y, size_t d);
double distance_f64(const float* x, const float* y, size_t d, Metric metric);

/// Exhaustive nearest-centroid scan; ties break to the lowest id.
uint32_t nearest_centroid(const float* centroids, uint32_t b, size_t d,
                          const float* x, Metric metric);

/// Serial whole-dataset assignment via nearest_centroid.
std::vector<uint32_t> assign_all_serial(const float* centroids, uint32_t b,
                                        const EmbeddingMatrix& vectors,
                                        Metric metric);

struct ScoredId {
  double score;
  uint32_t id;
};

/// Two-pass exact filtered search: gather every matching row id, score all
/// of them, full sort by (score, id), truncate to k. Independent oracle for
/// the single-pass ground-truth scan.
std::vector<ScoredId> exact_filtered_topk_twopass(const EmbeddingMatrix& vectors,
                                                  const AttributeTable& attrs,
                                                  const float* q,
                                                  const QueryFilter& f,
                                                  uint32_t k, Metric metric);

}  // namespace caps::ref
