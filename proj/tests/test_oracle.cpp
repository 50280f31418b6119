#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "caps/oracle.hpp"
#include "caps/reference.hpp"
#include "test_util.hpp"

using namespace caps;

TEST_CASE("k covering the whole match set returns it fully sorted") {
  auto vectors = test::random_vectors(300, 8, 1);
  auto attrs = test::random_attrs(300, 2, 3, 2);
  QueryFilter f({1, kWildcard});
  auto q = test::random_vectors(1, 8, 3);

  size_t matches = 0;
  for (size_t i = 0; i < attrs.size(); ++i)
    if (filter_matches(attrs.row_span(i), f)) ++matches;

  GroundTruthRow row = ground_truth(vectors, attrs, q.row(0), f, 300,
                                    Metric::SquaredEuclidean);
  CHECK(row.ids.size() == matches);
  CHECK(std::is_sorted(row.scores.begin(), row.scores.end()));
  for (uint32_t id : row.ids) CHECK(filter_matches(attrs.row_span(id), f));
}

TEST_CASE("all-wildcard filter reduces to plain exact kNN") {
  auto vectors = test::random_vectors(500, 10, 11);
  auto attrs = test::random_attrs(500, 2, 4, 12);
  auto q = test::random_vectors(1, 10, 13);
  QueryFilter f = QueryFilter::all_wildcard(2);

  GroundTruthRow row =
      ground_truth(vectors, attrs, q.row(0), f, 10, Metric::SquaredEuclidean);

  std::vector<uint32_t> ids(500);
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](uint32_t a, uint32_t b) {
    double da = ref::l2_sq_f64(q.row(0), vectors.row(a), 10);
    double db = ref::l2_sq_f64(q.row(0), vectors.row(b), 10);
    if (da != db) return da < db;
    return a < b;
  });
  ids.resize(10);
  CHECK(row.ids == ids);
}

TEST_CASE("single-pass scan matches the independent two-pass reference") {
  auto vectors = test::random_vectors(10000, 12, 21);
  auto attrs = test::random_attrs(10000, 3, 16, 22);
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto q = test::random_vectors(1, 12, rng.next_u64());
    // a rare fully-specified value combination
    QueryFilter f({static_cast<uint32_t>(rng.next_u64() % 16),
                   static_cast<uint32_t>(rng.next_u64() % 16), kWildcard});
    GroundTruthRow got = ground_truth(vectors, attrs, q.row(0), f, 50,
                                      Metric::SquaredEuclidean);
    auto want = ref::exact_filtered_topk_twopass(vectors, attrs, q.row(0), f,
                                                 50, Metric::SquaredEuclidean);
    REQUIRE(got.ids.size() == want.size());
    for (size_t j = 0; j < want.size(); ++j) {
      CHECK(got.ids[j] == want[j].id);
      CHECK(got.scores[j] == want[j].score);
    }
  }
}

TEST_CASE("ground truth is permutation invariant") {
  const size_t n = 400, d = 6;
  auto vectors = test::random_vectors(n, d, 31);
  auto attrs = test::random_attrs(n, 2, 4, 32);
  auto q = test::random_vectors(1, d, 33);
  QueryFilter f({2, kWildcard});

  // permute rows, translate ids back, compare
  std::vector<uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(34);
  for (size_t i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.next_u64() % (i + 1)]);

  EmbeddingMatrix pv(n, d);
  AttributeTable pa(n, 2);
  for (size_t i = 0; i < n; ++i) {
    std::copy(vectors.row(perm[i]), vectors.row(perm[i]) + d, pv.row(i));
    std::copy(attrs.row(perm[i]), attrs.row(perm[i]) + 2, pa.row(i));
  }

  auto base = ground_truth(vectors, attrs, q.row(0), f, 20, Metric::SquaredEuclidean);
  auto permuted = ground_truth(pv, pa, q.row(0), f, 20, Metric::SquaredEuclidean);
  std::vector<uint32_t> translated;
  for (uint32_t id : permuted.ids) translated.push_back(perm[id]);
  // scores are identical; id order may legitimately differ only on exact ties
  CHECK(permuted.scores == base.scores);
  std::sort(translated.begin(), translated.end());
  std::vector<uint32_t> base_sorted = base.ids;
  std::sort(base_sorted.begin(), base_sorted.end());
  CHECK(translated == base_sorted);
}

TEST_CASE("recall formula basics") {
  std::vector<uint32_t> a(100), b(100);
  std::iota(a.begin(), a.end(), 0);
  b = a;
  CHECK(recall_at_k(a, b, 100) == 1.0);

  std::iota(b.begin(), b.end(), 1000);
  CHECK(recall_at_k(a, b, 100) == 0.0);

  std::iota(b.begin(), b.end(), 50);  // 50..149 overlaps 50..99
  CHECK(recall_at_k(a, b, 100) == 0.5);

  CHECK_THROWS_AS(recall_at_k(a, b, 0), InvalidArgument);
}

TEST_CASE("recall denominators for short truth lists") {
  std::vector<uint32_t> retrieved = {1, 2, 3};
  std::vector<uint32_t> truth = {1, 2, 3};
  CHECK(recall_at_k(retrieved, truth, 10) == doctest::Approx(0.3));
  CHECK(recall_at_k(retrieved, truth, 10, RecallDenominator::TruthSize) == 1.0);
}

TEST_CASE("recall is order invariant") {
  std::vector<uint32_t> a = {5, 1, 9, 7};
  std::vector<uint32_t> b = {7, 5, 2, 14};
  double r1 = recall_at_k(a, b, 4);
  std::reverse(a.begin(), a.end());
  std::reverse(b.begin(), b.end());
  CHECK(recall_at_k(a, b, 4) == r1);
  CHECK(r1 == doctest::Approx(0.5));
}

TEST_CASE("ground truth cache round trip and key mismatch") {
  auto vectors = test::random_vectors(200, 6, 41);
  auto attrs = test::random_attrs(200, 2, 4, 42);
  auto queries = test::random_vectors(10, 6, 43);
  std::vector<QueryFilter> filters(10, QueryFilter::all_wildcard(2));

  auto rows = ground_truth_batch(vectors, attrs, queries, filters, 5,
                                 Metric::SquaredEuclidean);
  uint64_t key = ground_truth_key(vectors, attrs, queries, filters, 5,
                                  Metric::SquaredEuclidean);

  std::string path = test::temp_path("gt.bin");
  save_ground_truth(path, rows, key, 5);

  auto loaded = load_ground_truth(path, key, 5);
  REQUIRE(loaded.has_value());
  REQUIRE(loaded->size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK((*loaded)[i].ids == rows[i].ids);
    CHECK((*loaded)[i].scores == rows[i].scores);
  }

  CHECK_FALSE(load_ground_truth(path, key + 1, 5).has_value());
  CHECK_FALSE(load_ground_truth(path, key, 6).has_value());
  CHECK_FALSE(load_ground_truth(test::temp_path("missing_gt.bin"), key, 5)
                  .has_value());

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS_AS(load_ground_truth(path, key, 5), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("batch ground truth equals the per-query calls") {
  auto vectors = test::random_vectors(600, 8, 51);
  auto attrs = test::random_attrs(600, 2, 5, 52);
  auto queries = test::random_vectors(25, 8, 53);
  std::vector<QueryFilter> filters;
  Rng rng(54);
  for (int i = 0; i < 25; ++i)
    filters.push_back(QueryFilter({static_cast<uint32_t>(rng.next_u64() % 5),
                                   kWildcard}));
  auto batch = ground_truth_batch(vectors, attrs, queries, filters, 12,
                                  Metric::SquaredEuclidean);
  for (size_t i = 0; i < queries.size(); ++i) {
    auto single = ground_truth(vectors, attrs, queries.row(i), filters[i], 12,
                               Metric::SquaredEuclidean);
    CHECK(batch[i].ids == single.ids);
  }
}
