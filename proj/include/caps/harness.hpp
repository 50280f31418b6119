#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "caps/datagen.hpp"
#include "caps/engine.hpp"
#include "caps/oracle.hpp"

namespace caps {

struct SweepGrid {
  std::vector<uint32_t> b_list;
  std::vector<uint32_t> h_list;
  std::vector<uint32_t> m_list;  // clamped per config to [1, B]
};

struct SweepSettings {
  uint32_t k = 100;
  Metric metric = Metric::SquaredEuclidean;
  KMeansConfig kmeans;
  uint32_t warmup_queries = 100;
  bool exhaustive_subpartitions = false;
  bool postfilter = false;
  // Ground-truth cache path; empty = always recompute.
  std::string gt_cache_path;
};

struct SweepRow {
  std::string config_id;
  uint32_t b = 0;
  uint32_t h = 0;
  uint32_t m = 0;
  double absence = 0.0;
  uint32_t k = 0;
  double recall = 0.0;
  double mean_latency_us = 0.0;
  double qps = 0.0;
  double mean_candidates_scanned = 0.0;
  double mean_filter_passes = 0.0;
  double mean_distance_computations = 0.0;
  uint64_t index_overhead_bytes = 0;
  double build_seconds = 0.0;
};

inline constexpr const char* kSweepSchemaVersion = "caps-sweep-v1";

/// Builds every (B, h) config multi-threaded, then times the workload
/// single-threaded (after warmup) at each probe count m. Recall is always
/// recomputed against oracle ground truth, cached when a path is given.
std::vector<SweepRow> run_sweep(const EmbeddingMatrix& vectors,
                                const AttributeTable& attrs,
                                const QueryWorkload& workload,
                                const SweepGrid& grid,
                                const SweepSettings& settings);

void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows,
                     const std::string& metadata);
void write_sweep_json(const std::string& path, std::span<const SweepRow> rows,
                      const std::string& metadata);

struct UnhappySettings {
  uint32_t k = 10;
  double recall_floor = 0.95;
  uint32_t b = 128;
  uint32_t h = 1;
  uint32_t attr_seed = 7;
  KMeansConfig kmeans;
  Metric metric = Metric::SquaredEuclidean;
};

struct UnhappyRow {
  double sparsity = 0.0;
  // mean distance computations per query to reach the recall floor
  double cost_filter_then_search = 0.0;
  double cost_search_then_filter = 0.0;
  double cost_caps = 0.0;
  bool reachable_filter_then_search = true;
  bool reachable_search_then_filter = true;
  bool reachable_caps = true;
};

/// Single i.i.d. binary attribute at each sparsity level; measures the
/// distance computations each strategy needs to reach the recall floor.
std::vector<UnhappyRow> run_unhappy_middle(const EmbeddingMatrix& vectors,
                                           const EmbeddingMatrix& queries,
                                           std::span<const double> sparsity_grid,
                                           const UnhappySettings& settings);

void write_unhappy_csv(const std::string& path, std::span<const UnhappyRow> rows);

struct OverheadReport {
  uint64_t overhead_bytes = 0;   // serialized size minus header and data blocks
  uint64_t formula_bytes = 0;    // analysis closed form at the same params
  double build_seconds = 0.0;
};

/// Builds, serializes without embedded data, and reports the measured
/// overhead next to the closed-form estimate.
OverheadReport report_overhead(EmbeddingMatrix vectors, AttributeTable attrs,
                               const CapsConfig& config,
                               const std::string& scratch_path);

}  // namespace caps
