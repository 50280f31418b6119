// caps — filtered approximate near-neighbor search over two-level
// partitions. Subcommands: build, search, sweep, unhappy, overhead,
// groundtruth, gen-attrs, gen-vecs.

#include <omp.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>

#include "caps/analysis.hpp"
#include "caps/datagen.hpp"
#include "caps/engine.hpp"
#include "caps/harness.hpp"
#include "caps/oracle.hpp"

using namespace caps;

namespace {

bool has_extension(const std::string& path, const char* ext) {
  auto dot = path.rfind('.');
  return dot != std::string::npos && path.substr(dot) == ext;
}

EmbeddingMatrix load_vectors_auto(const std::string& path,
                                  const std::string& kind_flag) {
  VecElementKind kind = kind_flag.empty()
                            ? vec_kind_from_extension(path)
                            : (kind_flag == "f32"  ? VecElementKind::Float32
                               : kind_flag == "u8" ? VecElementKind::Uint8
                                                   : VecElementKind::Int32);
  return load_vecs(path, kind);
}

AttributeTable load_attrs_auto(const std::string& path, bool allow_wildcard) {
  if (has_extension(path, ".csv"))
    return load_attribute_table_csv(path, allow_wildcard);
  return load_attribute_table(path, allow_wildcard);
}

std::vector<QueryFilter> filters_from_table(const AttributeTable& table) {
  std::vector<QueryFilter> filters;
  filters.reserve(table.size());
  for (size_t i = 0; i < table.size(); ++i) {
    auto row = table.row_span(i);
    filters.emplace_back(std::vector<uint32_t>(row.begin(), row.end()));
  }
  return filters;
}

AttrDistribution distribution_from_name(const std::string& name) {
  if (name == "uniform") return AttrDistribution::Uniform;
  if (name == "exponential") return AttrDistribution::Exponential;
  if (name == "powerlaw") return AttrDistribution::PowerLaw;
  throw InvalidArgument("unknown attribute distribution: " + name);
}

void apply_thread_env() {
  if (const char* env = std::getenv("CAPS_THREADS")) {
    int threads = std::atoi(env);
    if (threads > 0) omp_set_num_threads(threads);
  }
}

struct AttrSpecFlags {
  uint32_t l = 3;
  std::vector<uint32_t> cardinalities;
  std::string dist = "exponential";
  double lambda = 1.0;
  double alpha = 1.5;
  uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("-L,--attr-count", l, "attribute positions per item");
    cmd->add_option("--cardinalities", cardinalities,
                    "per-position distinct value counts (default 12 each)")
        ->delimiter(',');
    cmd->add_option("--dist", dist,
                    "value distribution: uniform|exponential|powerlaw");
    cmd->add_option("--lambda", lambda, "exponential rate");
    cmd->add_option("--alpha", alpha, "power-law exponent");
    cmd->add_option("--attr-seed", seed, "attribute RNG seed");
  }

  AttributeSpec to_spec() const {
    AttributeSpec spec;
    spec.l = l;
    spec.cardinalities = cardinalities;
    spec.distribution = distribution_from_name(dist);
    spec.lambda = lambda;
    spec.alpha = alpha;
    spec.seed = seed;
    return spec;
  }
};

}  // namespace

int main(int argc, char** argv) {
  apply_thread_env();
  CLI::App app{"CAPS: filtered near-neighbor search via two-level partitions"};
  app.require_subcommand(1);

  // ----- build --------------------------------------------------------
  auto* build_cmd = app.add_subcommand("build", "build an index");
  std::string vectors_path, attrs_path, output_path, vector_kind, metric_name_s = "l2";
  uint32_t opt_b = 0, opt_h = 3, opt_iters = 15;
  uint64_t opt_seed = 42;
  uint32_t balance_cap = 0;
  bool no_balance = false, no_embed = false;
  build_cmd->add_option("--vectors", vectors_path, "fvecs/bvecs/ivecs file")
      ->required();
  build_cmd->add_option("--attributes", attrs_path, "attribute table (.bin/.csv)")
      ->required();
  build_cmd->add_option("--vector-kind", vector_kind, "f32|u8|i32 (default: by extension)");
  build_cmd->add_option("-o,--output", output_path, "index output path")->required();
  build_cmd->add_option("-B,--partitions", opt_b, "partition count (0 = ~sqrt(N))");
  build_cmd->add_option("-H,--height", opt_h, "AFT height h");
  build_cmd->add_option("--metric", metric_name_s, "l2|ip|cosine");
  build_cmd->add_option("--iters", opt_iters, "k-means iterations");
  build_cmd->add_option("--seed", opt_seed, "k-means seed");
  build_cmd->add_option("--balance-cap", balance_cap,
                        "max points per partition (0 = 1.25*N/B)");
  build_cmd->add_flag("--no-balance", no_balance, "plain Lloyd assignment");
  build_cmd->add_flag("--no-embed-data", no_embed,
                      "serialize index structure only");

  // ----- search -------------------------------------------------------
  auto* search_cmd = app.add_subcommand("search", "query an index");
  std::string index_path, queries_path, filters_path, results_path;
  uint32_t opt_k = 100, opt_m = 8;
  bool exhaustive = false, postfilter = false;
  search_cmd->add_option("--index", index_path, "index file")->required();
  search_cmd->add_option("--vectors", vectors_path,
                         "dataset vectors (for data-free indexes)");
  search_cmd->add_option("--attributes", attrs_path,
                         "dataset attributes (for data-free indexes)");
  search_cmd->add_option("--queries", queries_path, "query vectors")->required();
  search_cmd->add_option("--filters", filters_path,
                         "query filters (.bin/.csv, '*' or 4294967295 = wildcard)")
      ->required();
  search_cmd->add_option("-k", opt_k, "neighbors per query");
  search_cmd->add_option("-m,--probes", opt_m, "partitions to probe");
  search_cmd->add_flag("--exhaustive", exhaustive, "scan all sub-partitions");
  search_cmd->add_flag("--postfilter", postfilter, "IVF post-filter baseline");
  search_cmd->add_option("-o,--output", results_path, "JSON results (default stdout)");

  // ----- groundtruth ---------------------------------------------------
  auto* gt_cmd = app.add_subcommand("groundtruth", "exact filtered kNN");
  gt_cmd->add_option("--vectors", vectors_path, "dataset vectors")->required();
  gt_cmd->add_option("--attributes", attrs_path, "dataset attributes")->required();
  gt_cmd->add_option("--queries", queries_path, "query vectors")->required();
  gt_cmd->add_option("--filters", filters_path, "query filters")->required();
  gt_cmd->add_option("-k", opt_k, "neighbors per query");
  gt_cmd->add_option("--metric", metric_name_s, "l2|ip|cosine");
  gt_cmd->add_option("-o,--output", output_path, "cache file")->required();

  // ----- sweep ----------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "recall/QPS benchmark grid");
  std::vector<uint32_t> b_list{0}, h_list{3}, m_list{1, 2, 4, 8, 16, 32};
  double absence = 0.0;
  std::string gt_cache, format = "csv";
  uint32_t warmup = 100;
  AttrSpecFlags sweep_spec;
  sweep_cmd->add_option("--vectors", vectors_path, "dataset vectors")->required();
  sweep_cmd->add_option("--attributes", attrs_path,
                        "dataset attributes (else generated from the spec)");
  sweep_cmd->add_option("--queries", queries_path, "query vectors")->required();
  sweep_cmd->add_option("--filters", filters_path,
                        "filter file (else generated with --absence)");
  sweep_cmd->add_option("--b-list", b_list, "partition counts")->delimiter(',');
  sweep_cmd->add_option("--h-list", h_list, "AFT heights")->delimiter(',');
  sweep_cmd->add_option("--m-list", m_list, "probe counts")->delimiter(',');
  sweep_cmd->add_option("--absence", absence, "wildcard probability per position");
  sweep_cmd->add_option("-k", opt_k, "neighbors per query");
  sweep_cmd->add_option("--metric", metric_name_s, "l2|ip|cosine");
  sweep_cmd->add_option("--iters", opt_iters, "k-means iterations");
  sweep_cmd->add_option("--seed", opt_seed, "k-means seed");
  sweep_cmd->add_option("--warmup", warmup, "untimed warmup queries");
  sweep_cmd->add_option("--gt-cache", gt_cache, "ground-truth cache path");
  sweep_cmd->add_option("--format", format, "csv|json");
  sweep_cmd->add_option("-o,--output", output_path, "result file")->required();
  sweep_cmd->add_flag("--exhaustive", exhaustive, "scan all sub-partitions");
  sweep_cmd->add_flag("--postfilter", postfilter, "IVF post-filter baseline");
  sweep_spec.attach(sweep_cmd);

  // ----- unhappy --------------------------------------------------------
  auto* unhappy_cmd = app.add_subcommand(
      "unhappy", "sparsity sweep with a single binary attribute");
  std::vector<double> sparsity_grid{0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 0.6, 0.9};
  double recall_floor = 0.95;
  uint32_t unhappy_b = 128, unhappy_h = 1;
  unhappy_cmd->add_option("--vectors", vectors_path, "dataset vectors")->required();
  unhappy_cmd->add_option("--queries", queries_path, "query vectors")->required();
  unhappy_cmd->add_option("--sparsity", sparsity_grid, "sparsity grid")
      ->delimiter(',');
  unhappy_cmd->add_option("--recall-floor", recall_floor, "target recall");
  unhappy_cmd->add_option("-k", opt_k, "neighbors per query");
  unhappy_cmd->add_option("-B,--partitions", unhappy_b, "partition count");
  unhappy_cmd->add_option("-H,--height", unhappy_h, "AFT height");
  unhappy_cmd->add_option("--iters", opt_iters, "k-means iterations");
  unhappy_cmd->add_option("-o,--output", output_path, "CSV output")->required();

  // ----- overhead -------------------------------------------------------
  auto* overhead_cmd = app.add_subcommand("overhead", "index overhead report");
  bool as_json = false;
  overhead_cmd->add_option("--vectors", vectors_path, "dataset vectors")->required();
  overhead_cmd->add_option("--attributes", attrs_path, "dataset attributes")
      ->required();
  overhead_cmd->add_option("-B,--partitions", opt_b, "partition count (0 = ~sqrt(N))");
  overhead_cmd->add_option("-H,--height", opt_h, "AFT height");
  overhead_cmd->add_option("--metric", metric_name_s, "l2|ip|cosine");
  overhead_cmd->add_option("--iters", opt_iters, "k-means iterations");
  overhead_cmd->add_flag("--json", as_json, "emit JSON");

  // ----- gen-attrs --------------------------------------------------------
  auto* gen_attrs_cmd =
      app.add_subcommand("gen-attrs", "generate synthetic attributes");
  uint32_t gen_n = 0;
  AttrSpecFlags gen_spec;
  gen_attrs_cmd->add_option("-n,--count", gen_n, "rows")->required();
  gen_attrs_cmd->add_option("-o,--output", output_path, ".bin or .csv")->required();
  gen_spec.attach(gen_attrs_cmd);

  // ----- gen-vecs ---------------------------------------------------------
  auto* gen_vecs_cmd =
      app.add_subcommand("gen-vecs", "generate a Gaussian-mixture corpus");
  uint32_t gen_d = 32, gen_clusters = 64;
  double center_scale = 3.0;
  gen_vecs_cmd->add_option("-n,--count", gen_n, "rows")->required();
  gen_vecs_cmd->add_option("-d,--dim", gen_d, "dimensions");
  gen_vecs_cmd->add_option("--clusters", gen_clusters, "mixture components");
  gen_vecs_cmd->add_option("--center-scale", center_scale, "component spread");
  gen_vecs_cmd->add_option("--seed", opt_seed, "RNG seed");
  gen_vecs_cmd->add_option("-o,--output", output_path, ".fvecs output")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build_cmd) {
      CapsConfig config;
      config.b = opt_b;
      config.h = opt_h;
      config.metric = metric_from_name(metric_name_s);
      config.kmeans.iters = opt_iters;
      config.kmeans.seed = opt_seed;
      if (no_balance) config.kmeans.balanced = false;
      if (balance_cap > 0) config.kmeans.balance_cap = balance_cap;

      EmbeddingMatrix vectors = load_vectors_auto(vectors_path, vector_kind);
      AttributeTable attrs = load_attrs_auto(attrs_path, false);
      CapsIndex index =
          CapsIndex::build(std::move(vectors), std::move(attrs), config);
      index.save(output_path, !no_embed);
      std::cout << "built index: n=" << index.size() << " d=" << index.dim()
                << " L=" << index.attr_count()
                << " B=" << index.partition_count() << " h=" << index.height()
                << " r=" << index.attr_precision_bytes() << " overhead="
                << index.serialized_overhead_bytes() << " bytes -> "
                << output_path << "\n";
    } else if (*search_cmd) {
      CapsIndex index =
          (!vectors_path.empty() && !attrs_path.empty())
              ? CapsIndex::load(index_path,
                                load_vectors_auto(vectors_path, vector_kind),
                                load_attrs_auto(attrs_path, false))
              : CapsIndex::load(index_path);
      EmbeddingMatrix queries = load_vectors_auto(queries_path, "");
      auto filters = filters_from_table(load_attrs_auto(filters_path, true));
      if (filters.size() != queries.size())
        throw InvalidArgument("queries and filters disagree on count");

      SearchOptions opts;
      opts.exhaustive_subpartitions = exhaustive;
      opts.postfilter = postfilter;

      nlohmann::json out = nlohmann::json::array();
      for (size_t i = 0; i < queries.size(); ++i) {
        SearchResult res = index.search(queries.row_span(i), filters[i], opt_k,
                                        std::min(opt_m, index.partition_count()),
                                        opts);
        out.push_back({{"query", i},
                       {"ids", res.ids},
                       {"scores", res.scores},
                       {"candidates_scanned", res.stats.candidates_scanned},
                       {"filter_passes", res.stats.filter_passes},
                       {"distance_computations", res.stats.distance_computations}});
      }
      if (results_path.empty()) {
        std::cout << out.dump(2) << "\n";
      } else {
        std::ofstream f(results_path);
        f << out.dump(2) << "\n";
        std::cout << "wrote " << queries.size() << " results -> "
                  << results_path << "\n";
      }
    } else if (*gt_cmd) {
      EmbeddingMatrix vectors = load_vectors_auto(vectors_path, vector_kind);
      AttributeTable attrs = load_attrs_auto(attrs_path, false);
      EmbeddingMatrix queries = load_vectors_auto(queries_path, "");
      auto filters = filters_from_table(load_attrs_auto(filters_path, true));
      Metric metric = metric_from_name(metric_name_s);
      auto rows =
          ground_truth_batch(vectors, attrs, queries, filters, opt_k, metric);
      uint64_t key =
          ground_truth_key(vectors, attrs, queries, filters, opt_k, metric);
      save_ground_truth(output_path, rows, key, opt_k);
      std::cout << "wrote ground truth for " << rows.size() << " queries -> "
                << output_path << "\n";
    } else if (*sweep_cmd) {
      EmbeddingMatrix vectors = load_vectors_auto(vectors_path, vector_kind);
      EmbeddingMatrix queries = load_vectors_auto(queries_path, "");
      AttributeSpec spec = sweep_spec.to_spec();
      AttributeTable attrs =
          attrs_path.empty()
              ? gen_attributes(static_cast<uint32_t>(vectors.size()), spec)
              : load_attrs_auto(attrs_path, false);

      QueryWorkload workload;
      if (!filters_path.empty()) {
        workload.queries = std::move(queries);
        workload.filters =
            filters_from_table(load_attrs_auto(filters_path, true));
        double wildcards = 0;
        for (const auto& f : workload.filters) wildcards += f.wildcard_count();
        workload.absence_fraction =
            workload.filters.empty()
                ? 0.0
                : wildcards / (workload.filters.size() * attrs.attr_count());
      } else {
        workload = gen_workload(std::move(queries), spec, absence,
                                spec.seed + 1);
      }

      SweepGrid grid;
      grid.b_list = b_list;
      grid.h_list = h_list;
      grid.m_list = m_list;
      for (auto& b : grid.b_list)
        if (b == 0) b = default_partition_count(vectors.size());

      SweepSettings settings;
      settings.k = opt_k;
      settings.metric = metric_from_name(metric_name_s);
      settings.kmeans.iters = opt_iters;
      settings.kmeans.seed = opt_seed;
      settings.warmup_queries = warmup;
      settings.exhaustive_subpartitions = exhaustive;
      settings.postfilter = postfilter;
      settings.gt_cache_path = gt_cache;

      auto rows = run_sweep(vectors, attrs, workload, grid, settings);
      std::string metadata =
          "threads=" + std::to_string(omp_get_max_threads()) +
          " warmup=" + std::to_string(warmup);
      if (format == "json")
        write_sweep_json(output_path, rows, metadata);
      else
        write_sweep_csv(output_path, rows, metadata);
      std::cout << "wrote " << rows.size() << " sweep rows -> " << output_path
                << "\n";
    } else if (*unhappy_cmd) {
      EmbeddingMatrix vectors = load_vectors_auto(vectors_path, vector_kind);
      EmbeddingMatrix queries = load_vectors_auto(queries_path, "");
      UnhappySettings settings;
      settings.k = opt_k;
      settings.recall_floor = recall_floor;
      settings.b = unhappy_b;
      settings.h = unhappy_h;
      settings.kmeans.iters = opt_iters;
      auto rows = run_unhappy_middle(vectors, queries, sparsity_grid, settings);
      write_unhappy_csv(output_path, rows);
      std::cout << "wrote " << rows.size() << " sparsity rows -> "
                << output_path << "\n";
    } else if (*overhead_cmd) {
      CapsConfig config;
      config.b = opt_b;
      config.h = opt_h;
      config.metric = metric_from_name(metric_name_s);
      config.kmeans.iters = opt_iters;
      EmbeddingMatrix vectors = load_vectors_auto(vectors_path, vector_kind);
      AttributeTable attrs = load_attrs_auto(attrs_path, false);
      std::string scratch =
          (std::filesystem::temp_directory_path() / "caps_overhead.caps").string();
      auto report =
          report_overhead(std::move(vectors), std::move(attrs), config, scratch);
      std::filesystem::remove(scratch);
      if (as_json) {
        nlohmann::json j = {{"overhead_bytes", report.overhead_bytes},
                            {"formula_bytes", report.formula_bytes},
                            {"build_seconds", report.build_seconds}};
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << "overhead_bytes=" << report.overhead_bytes
                  << " formula_bytes=" << report.formula_bytes
                  << " build_seconds=" << report.build_seconds << "\n";
      }
    } else if (*gen_attrs_cmd) {
      AttributeTable attrs = gen_attributes(gen_n, gen_spec.to_spec());
      if (has_extension(output_path, ".csv"))
        save_attribute_table_csv(output_path, attrs);
      else
        save_attribute_table(output_path, attrs);
      std::cout << "wrote " << attrs.size() << "x" << attrs.attr_count()
                << " attributes -> " << output_path << "\n";
    } else if (*gen_vecs_cmd) {
      EmbeddingMatrix m =
          gen_gaussian_mixture(gen_n, gen_d, gen_clusters, center_scale, opt_seed);
      save_vecs(output_path, m);
      std::cout << "wrote " << m.size() << "x" << m.dim() << " vectors -> "
                << output_path << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
