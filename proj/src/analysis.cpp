#include "caps/analysis.hpp"

#include <cmath>

#include "caps/core.hpp"

namespace caps::analysis {

double estimate_query_time(const CostModelParams& p) {
  const double bd = static_cast<double>(p.b) * p.d;
  if (p.m == 0) return bd;
  if (p.m > p.b) throw InvalidArgument("estimate_query_time: m > B");
  const double log2m = std::log2(static_cast<double>(p.m));
  const double mean_subpartition =
      (static_cast<double>(p.n) / p.b) / (static_cast<double>(p.h) + 1.0);
  return bd + p.b * log2m + p.m +
         p.m * mean_subpartition * (p.l + p.d * p.gamma);
}

double estimate_query_time_empirical(const CostModelParams& p,
                                     std::span<const uint64_t> subpartition_sizes) {
  const uint64_t slots_per_partition = static_cast<uint64_t>(p.h) + 1;
  if (subpartition_sizes.size() != static_cast<size_t>(p.b) * slots_per_partition)
    throw InvalidArgument("estimate_query_time_empirical: need B*(h+1) sizes");
  const double bd = static_cast<double>(p.b) * p.d;
  if (p.m == 0) return bd;
  if (p.m > p.b) throw InvalidArgument("estimate_query_time_empirical: m > B");

  // Expected scanned size when a filter selects one sub-partition with
  // probability proportional to its share of the partition.
  double mean_expected = 0.0;
  uint32_t nonempty = 0;
  for (uint32_t bin = 0; bin < p.b; ++bin) {
    double partition_total = 0.0;
    double sq = 0.0;
    for (uint64_t j = 0; j < slots_per_partition; ++j) {
      double s = static_cast<double>(
          subpartition_sizes[bin * slots_per_partition + j]);
      partition_total += s;
      sq += s * s;
    }
    if (partition_total > 0.0) {
      mean_expected += sq / partition_total;
      ++nonempty;
    }
  }
  if (nonempty > 0) mean_expected /= nonempty;

  const double log2m = std::log2(static_cast<double>(p.m));
  return bd + p.b * log2m + p.m + p.m * mean_expected * (p.l + p.d * p.gamma);
}

OptimalExponent optimal_exponent(const CostModelParams& p) {
  if (p.n <= 1) throw InvalidArgument("optimal_exponent: N must be > 1");
  if (p.m < 1) throw InvalidArgument("optimal_exponent: m must be >= 1");
  OptimalExponent out;
  const double log2m = std::log2(static_cast<double>(p.m));
  out.theta = (p.l + p.d * p.gamma) * p.m /
              ((static_cast<double>(p.h) + 1.0) * (p.d + log2m));
  if (!(out.theta > 0.0))
    throw InvalidArgument("optimal_exponent: theta must be > 0");
  const double logn = std::log(static_cast<double>(p.n));
  out.t = std::log(static_cast<double>(p.n) * out.theta) / (2.0 * logn);
  out.b_star = static_cast<uint64_t>(
      std::llround(std::pow(static_cast<double>(p.n), out.t)));
  return out;
}

uint32_t attribute_precision_bytes(uint64_t k_total_values) {
  if (k_total_values <= 1) return 1;
  // ceil(log2(k)) == bit_width(k - 1) for k >= 2
  uint32_t bits = 0;
  uint64_t v = k_total_values - 1;
  while (v > 0) {
    ++bits;
    v >>= 1;
  }
  uint32_t bytes = (bits + 7) / 8;
  return bytes < 1 ? 1 : bytes;
}

uint64_t estimate_index_size(const CostModelParams& p, bool include_data) {
  const uint64_t slots = static_cast<uint64_t>(p.b) * (p.h + 1);
  uint64_t size =
      4ULL * p.b * p.d + 4ULL * p.n + 4ULL * slots + 2ULL * slots * p.r;
  if (include_data)
    size += 4ULL * p.n * p.d + static_cast<uint64_t>(p.n) * p.l * p.r;
  return size;
}

}  // namespace caps::analysis
