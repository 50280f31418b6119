// Serial-reference vs OpenMP kernel comparison. Run manually:
//   ./build/bench/caps_bench [n] [d]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "caps/aft.hpp"
#include "caps/datagen.hpp"
#include "caps/engine.hpp"
#include "caps/oracle.hpp"
#include "caps/partitioner.hpp"
#include "caps/reference.hpp"

using namespace caps;

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_secs(F&& fn) {
  auto start = Clock::now();
  fn();
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-34s %10.3fs %10.3fs %8.2fx\n", name, serial, parallel,
              serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const uint32_t n = argc > 1 ? static_cast<uint32_t>(std::atoi(argv[1])) : 100000;
  const uint32_t d = argc > 2 ? static_cast<uint32_t>(std::atoi(argv[2])) : 64;
  const uint32_t b = 256;
  const uint32_t nq = 64;

  std::printf("corpus: n=%u d=%u B=%u, threads=%d\n\n", n, d, b,
              omp_get_max_threads());
  std::printf("%-34s %11s %11s %9s\n", "kernel", "serial", "openmp", "speedup");

  EmbeddingMatrix vectors = gen_gaussian_mixture(n, d, 128, 3.0, 1);
  AttributeSpec spec;
  spec.l = 3;
  spec.seed = 2;
  AttributeTable attrs = gen_attributes(n, spec);
  EmbeddingMatrix queries = gen_gaussian_mixture(nq, d, 128, 3.0, 3);

  // distance kernel: unrolled float vs plain double loop, whole-corpus scan
  {
    volatile double sink = 0.0;
    double serial = time_secs([&] {
      double acc = 0.0;
      for (uint32_t qi = 0; qi < 8; ++qi)
        for (uint32_t i = 0; i < n; ++i)
          acc += ref::l2_sq_f64(queries.row(qi), vectors.row(i), d);
      sink = acc;
    });
    double fast = time_secs([&] {
      double acc = 0.0;
      for (uint32_t qi = 0; qi < 8; ++qi)
        for (uint32_t i = 0; i < n; ++i)
          acc += l2_sq(queries.row(qi), vectors.row(i), d);
      sink = acc;
    });
    report("l2 scan (f64 ref vs f32 unrolled)", serial, fast);
  }

  KMeansConfig km;
  km.iters = 5;
  km.balanced = false;  // pure nearest-centroid so the reference comparison holds
  PartitionModel model = train(vectors, b, km);

  // batch nearest-centroid assignment
  {
    std::vector<uint32_t> serial_out, parallel_out;
    double serial = time_secs([&] {
      serial_out = ref::assign_all_serial(model.centroids().data(), b, vectors,
                                          model.metric());
    });
    double parallel = time_secs([&] { parallel_out = assign_all(model, vectors); });
    report("batch centroid assignment", serial, parallel);
    if (serial_out != parallel_out) {
      std::printf("MISMATCH: parallel assignment differs from the reference\n");
      return 1;
    }
  }

  // AFT construction across partitions
  {
    auto assignment = assign_all(model, vectors);
    std::vector<std::vector<uint32_t>> members(b);
    for (size_t i = 0; i < assignment.size(); ++i)
      members[assignment[i]].push_back(static_cast<uint32_t>(i));

    std::vector<Aft> serial_afts(b), parallel_afts(b);
    double serial = time_secs([&] {
      for (uint32_t bin = 0; bin < b; ++bin)
        serial_afts[bin] = Aft::build(members[bin], attrs, 7);
    });
    double parallel = time_secs([&] {
#pragma omp parallel for schedule(dynamic)
      for (int64_t bin = 0; bin < b; ++bin)
        parallel_afts[bin] = Aft::build(members[bin], attrs, 7);
    });
    report("AFT build across partitions", serial, parallel);
    for (uint32_t bin = 0; bin < b; ++bin) {
      if (serial_afts[bin].remainder() != parallel_afts[bin].remainder()) {
        std::printf("MISMATCH: AFT build differs across schedules\n");
        return 1;
      }
    }
  }

  // exact filtered ground truth over the query batch
  {
    std::vector<QueryFilter> filters(nq, QueryFilter({0, kWildcard, kWildcard}));
    std::vector<GroundTruthRow> serial_rows, parallel_rows;
    double serial = time_secs([&] {
      serial_rows.clear();
      for (uint32_t qi = 0; qi < nq; ++qi)
        serial_rows.push_back(ground_truth(vectors, attrs, queries.row(qi),
                                           filters[qi], 100,
                                           Metric::SquaredEuclidean));
    });
    double parallel = time_secs([&] {
      parallel_rows = ground_truth_batch(vectors, attrs, queries, filters, 100,
                                         Metric::SquaredEuclidean);
    });
    report("exact filtered ground truth", serial, parallel);
    for (uint32_t qi = 0; qi < nq; ++qi) {
      if (serial_rows[qi].ids != parallel_rows[qi].ids) {
        std::printf("MISMATCH: ground truth differs across schedules\n");
        return 1;
      }
    }
  }

  // end-to-end: interleaved search vs post-filter baseline on one index
  {
    CapsConfig config;
    config.b = b;
    config.h = 7;
    config.kmeans.iters = 5;
    CapsIndex index = CapsIndex::build(vectors, attrs, config);
    std::vector<QueryFilter> filters(nq, QueryFilter({0, kWildcard, kWildcard}));

    uint64_t caps_dists = 0, post_dists = 0;
    double caps_time = time_secs([&] {
      for (uint32_t qi = 0; qi < nq; ++qi) {
        auto res = index.search(queries.row_span(qi), filters[qi], 100, 16);
        caps_dists += res.stats.distance_computations;
      }
    });
    SearchOptions post;
    post.postfilter = true;
    double post_time = time_secs([&] {
      for (uint32_t qi = 0; qi < nq; ++qi) {
        auto res = index.search(queries.row_span(qi), filters[qi], 100, 16, post);
        post_dists += res.stats.distance_computations;
      }
    });
    std::printf("\nsingle-thread query loop, m=16: interleaved %.3fs (%llu dists), "
                "post-filter %.3fs (%llu dists)\n",
                caps_time, static_cast<unsigned long long>(caps_dists),
                post_time, static_cast<unsigned long long>(post_dists));
  }
  return 0;
}
