#pragma once

#include <cstdint>
#include <span>

namespace caps::analysis {

/// Symbols of the closed-form cost models.
struct CostModelParams {
  uint64_t n = 0;       // points
  uint32_t d = 0;       // embedding dims
  uint32_t l = 0;       // attribute positions
  uint32_t b = 0;       // partitions
  uint32_t m = 0;       // probes
  uint32_t h = 0;       // AFT height
  double gamma = 0.0;   // attribute-match sparsity in [0, 1]
  uint32_t r = 1;       // attribute precision, bytes
  uint64_t k_total_values = 0;  // total distinct attribute values
};

/// Balanced-sub-partition query-time upper bound, in abstract units:
///   B*d + B*log2(m) + m + m * (N/B)/(h+1) * (L + d*gamma).
/// m = 0 degenerates to the centroid-scan term B*d alone.
double estimate_query_time(const CostModelParams& p);

/// Empirical variant replacing the balanced (N/B)/(h+1) factor with the
/// expected scanned sub-partition size under tag-frequency-matched filters:
/// per partition sum_j |p_j|^2 / |P|, averaged over partitions. Sizes are
/// the B*(h+1) sub-partition sizes, partition-major.
double estimate_query_time_empirical(const CostModelParams& p,
                                     std::span<const uint64_t> subpartition_sizes);

struct OptimalExponent {
  double theta = 0.0;
  double t = 0.0;       // optimal partition-count exponent, B* = N^t
  uint64_t b_star = 0;  // N^t rounded to nearest integer
};

/// Minimizer of the query-time upper bound over the partition-count
/// exponent: theta = (L + d*gamma)*m / ((h+1)*(d + log2 m)),
/// t = log(N*theta) / (2*log N).
OptimalExponent optimal_exponent(const CostModelParams& p);

/// Bytes needed to represent one attribute code:
/// max(1, ceil(ceil(log2(k_total_values)) / 8)).
uint32_t attribute_precision_bytes(uint64_t k_total_values);

/// Index bytes excluding the fixed header:
///   4Bd + 4N + 4B(h+1) + 2B(h+1)r, plus 4Nd + NLr with include_data.
uint64_t estimate_index_size(const CostModelParams& p, bool include_data);

}  // namespace caps::analysis
