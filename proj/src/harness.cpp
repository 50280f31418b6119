#include "caps/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "caps/analysis.hpp"

namespace caps {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<GroundTruthRow> ground_truth_cached(
    const EmbeddingMatrix& vectors, const AttributeTable& attrs,
    const QueryWorkload& workload, uint32_t k, Metric metric,
    const std::string& cache_path) {
  uint64_t key = ground_truth_key(vectors, attrs, workload.queries,
                                  workload.filters, k, metric);
  if (!cache_path.empty()) {
    auto cached = load_ground_truth(cache_path, key, k);
    if (cached) return std::move(*cached);
    std::fprintf(stderr,
                 "[caps] warning: ground truth missing at %s, computing\n",
                 cache_path.c_str());
  }
  auto rows = ground_truth_batch(vectors, attrs, workload.queries,
                                 workload.filters, k, metric);
  if (!cache_path.empty()) save_ground_truth(cache_path, rows, key, k);
  return rows;
}

}  // namespace

std::vector<SweepRow> run_sweep(const EmbeddingMatrix& vectors,
                                const AttributeTable& attrs,
                                const QueryWorkload& workload,
                                const SweepGrid& grid,
                                const SweepSettings& settings) {
  if (grid.b_list.empty() || grid.h_list.empty() || grid.m_list.empty())
    throw InvalidArgument("run_sweep: empty config grid");
  const size_t nq = workload.queries.size();
  if (nq == 0) throw InvalidArgument("run_sweep: empty workload");

  auto truth = ground_truth_cached(vectors, attrs, workload, settings.k,
                                   settings.metric, settings.gt_cache_path);

  SearchOptions opts;
  opts.exhaustive_subpartitions = settings.exhaustive_subpartitions;
  opts.postfilter = settings.postfilter;

  std::vector<SweepRow> rows;
  for (uint32_t b : grid.b_list) {
    for (uint32_t h : grid.h_list) {
      CapsConfig config;
      config.b = b;
      config.h = h;
      config.metric = settings.metric;
      config.kmeans = settings.kmeans;

      auto build_start = Clock::now();
      CapsIndex index = CapsIndex::build(vectors, attrs, config);
      double build_seconds = seconds_since(build_start);

      std::vector<uint32_t> m_values;
      for (uint32_t m : grid.m_list)
        m_values.push_back(std::min(m, index.partition_count()));
      m_values.erase(std::unique(m_values.begin(), m_values.end()),
                     m_values.end());

      for (uint32_t m : m_values) {
        // untimed warmup against page faults and cold caches
        uint32_t warm = static_cast<uint32_t>(
            std::min<size_t>(settings.warmup_queries, nq));
        for (uint32_t i = 0; i < warm; ++i)
          index.search(workload.queries.row_span(i), workload.filters[i],
                       settings.k, m, opts);

        SweepRow row;
        row.b = index.partition_count();
        row.h = h;
        row.m = m;
        row.absence = workload.absence_fraction;
        row.k = settings.k;
        row.config_id = "B" + std::to_string(row.b) + "-h" + std::to_string(h);
        row.index_overhead_bytes = index.serialized_overhead_bytes();
        row.build_seconds = build_seconds;

        SearchStats totals;
        double recall_sum = 0.0;
        auto timer_start = Clock::now();
        for (size_t i = 0; i < nq; ++i) {
          SearchResult res = index.search(workload.queries.row_span(i),
                                          workload.filters[i], settings.k, m,
                                          opts);
          totals.candidates_scanned += res.stats.candidates_scanned;
          totals.filter_passes += res.stats.filter_passes;
          totals.distance_computations += res.stats.distance_computations;
          recall_sum += recall_at_k(res.ids, truth[i].ids, settings.k);
        }
        double elapsed = seconds_since(timer_start);

        row.recall = recall_sum / static_cast<double>(nq);
        row.mean_latency_us = elapsed * 1e6 / static_cast<double>(nq);
        row.qps = static_cast<double>(nq) / elapsed;
        row.mean_candidates_scanned =
            static_cast<double>(totals.candidates_scanned) / nq;
        row.mean_filter_passes = static_cast<double>(totals.filter_passes) / nq;
        row.mean_distance_computations =
            static_cast<double>(totals.distance_computations) / nq;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows,
                     const std::string& metadata) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "# schema=" << kSweepSchemaVersion;
  if (!metadata.empty()) out << ' ' << metadata;
  out << '\n';
  out << "config_id,b,h,m,absence,k,recall,mean_latency_us,qps,"
         "mean_candidates_scanned,mean_filter_passes,"
         "mean_distance_computations,index_overhead_bytes,build_seconds\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%u,%u,%u,%.6g,%u,%.6f,%.3f,%.3f,%.3f,%.3f,%.3f,%llu,%.3f\n",
                  r.config_id.c_str(), r.b, r.h, r.m, r.absence, r.k, r.recall,
                  r.mean_latency_us, r.qps, r.mean_candidates_scanned,
                  r.mean_filter_passes, r.mean_distance_computations,
                  static_cast<unsigned long long>(r.index_overhead_bytes),
                  r.build_seconds);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

namespace {

nlohmann::json sweep_row_json(const SweepRow& r) {
  return {
      {"config_id", r.config_id},
      {"b", r.b},
      {"h", r.h},
      {"m", r.m},
      {"absence", r.absence},
      {"k", r.k},
      {"recall", r.recall},
      {"mean_latency_us", r.mean_latency_us},
      {"qps", r.qps},
      {"mean_candidates_scanned", r.mean_candidates_scanned},
      {"mean_filter_passes", r.mean_filter_passes},
      {"mean_distance_computations", r.mean_distance_computations},
      {"index_overhead_bytes", r.index_overhead_bytes},
      {"build_seconds", r.build_seconds},
  };
}

}  // namespace

void write_sweep_json(const std::string& path, std::span<const SweepRow> rows,
                      const std::string& metadata) {
  nlohmann::json doc;
  doc["schema"] = kSweepSchemaVersion;
  doc["metadata"] = metadata;
  doc["rows"] = nlohmann::json::array();
  for (const auto& r : rows) doc["rows"].push_back(sweep_row_json(r));
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<UnhappyRow> run_unhappy_middle(const EmbeddingMatrix& vectors,
                                           const EmbeddingMatrix& queries,
                                           std::span<const double> sparsity_grid,
                                           const UnhappySettings& settings) {
  const size_t n = vectors.size();
  const size_t nq = queries.size();
  if (n == 0 || nq == 0)
    throw InvalidArgument("run_unhappy_middle: empty dataset or query set");

  std::vector<uint32_t> m_grid;
  for (uint32_t m = 1; m < settings.b; m *= 2) m_grid.push_back(m);
  m_grid.push_back(settings.b);

  std::vector<UnhappyRow> rows;
  for (size_t grid_idx = 0; grid_idx < sparsity_grid.size(); ++grid_idx) {
    double sparsity = sparsity_grid[grid_idx];
    if (sparsity <= 0.0 || sparsity > 1.0)
      throw InvalidArgument("run_unhappy_middle: sparsity must be in (0, 1]");

    // One binary attribute: value 1 with probability `sparsity`.
    AttributeTable attrs(n, 1);
    Rng rng(settings.attr_seed + grid_idx);
    uint64_t matching = 0;
    for (size_t i = 0; i < n; ++i) {
      uint32_t v = rng.next_double() < sparsity ? 1u : 0u;
      attrs.row(i)[0] = v;
      matching += v;
    }
    QueryFilter filter({1u});
    std::vector<QueryFilter> filters(nq, filter);

    auto truth = ground_truth_batch(vectors, attrs, queries, filters,
                                    settings.k, settings.metric);

    UnhappyRow row;
    row.sparsity = sparsity;

    // Filter-then-search: brute force over D_C; exact by construction, so
    // the floor is reachable iff exact recall (|D_C 'cap' k| / k) reaches it.
    double exact_recall = 0.0;
    for (const auto& t : truth)
      exact_recall += static_cast<double>(t.ids.size()) / settings.k;
    exact_recall /= static_cast<double>(nq);
    row.cost_filter_then_search = static_cast<double>(matching);
    row.reachable_filter_then_search = exact_recall >= settings.recall_floor;

    CapsConfig config;
    config.b = settings.b;
    config.h = settings.h;
    config.metric = settings.metric;
    config.kmeans = settings.kmeans;
    CapsIndex index = CapsIndex::build(vectors, attrs, config);

    auto sweep_until_floor = [&](bool postfilter, double* cost_out,
                                 bool* reachable_out) {
      SearchOptions opts;
      opts.postfilter = postfilter;
      *reachable_out = false;
      for (uint32_t m : m_grid) {
        uint64_t dist_total = 0;
        double recall_sum = 0.0;
        for (size_t i = 0; i < nq; ++i) {
          SearchResult res = index.search(queries.row_span(i), filters[i],
                                          settings.k, m, opts);
          dist_total += res.stats.distance_computations;
          recall_sum += recall_at_k(res.ids, truth[i].ids, settings.k);
        }
        *cost_out = static_cast<double>(dist_total) / nq;
        if (recall_sum / nq >= settings.recall_floor) {
          *reachable_out = true;
          break;
        }
      }
    };

    sweep_until_floor(true, &row.cost_search_then_filter,
                      &row.reachable_search_then_filter);
    sweep_until_floor(false, &row.cost_caps, &row.reachable_caps);
    rows.push_back(row);
  }
  return rows;
}

void write_unhappy_csv(const std::string& path, std::span<const UnhappyRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "# schema=caps-unhappy-v1\n";
  out << "sparsity,cost_filter_then_search,cost_search_then_filter,cost_caps,"
         "reachable_filter_then_search,reachable_search_then_filter,"
         "reachable_caps\n";
  for (const auto& r : rows) {
    out << r.sparsity << ',' << r.cost_filter_then_search << ','
        << r.cost_search_then_filter << ',' << r.cost_caps << ','
        << (r.reachable_filter_then_search ? 1 : 0) << ','
        << (r.reachable_search_then_filter ? 1 : 0) << ','
        << (r.reachable_caps ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

OverheadReport report_overhead(EmbeddingMatrix vectors, AttributeTable attrs,
                               const CapsConfig& config,
                               const std::string& scratch_path) {
  OverheadReport report;
  if (vectors.size() == 0) {
    // Nothing to index; the serialized form would be the header alone.
    return report;
  }
  auto start = std::chrono::steady_clock::now();
  CapsIndex index = CapsIndex::build(std::move(vectors), std::move(attrs), config);
  report.build_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  index.save(scratch_path, /*include_data=*/false);
  uint64_t file_size = std::filesystem::file_size(scratch_path);
  report.overhead_bytes = file_size - CapsIndex::kHeaderBytes;

  analysis::CostModelParams params;
  params.n = index.size();
  params.d = static_cast<uint32_t>(index.dim());
  params.l = static_cast<uint32_t>(index.attr_count());
  params.b = index.partition_count();
  params.h = index.height();
  params.r = index.attr_precision_bytes();
  report.formula_bytes = analysis::estimate_index_size(params, false);
  return report;
}

}  // namespace caps
