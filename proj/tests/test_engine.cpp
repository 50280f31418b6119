#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "caps/analysis.hpp"
#include "caps/engine.hpp"
#include "caps/oracle.hpp"
#include "caps/reference.hpp"
#include "test_util.hpp"

using namespace caps;

namespace {

struct Fixture {
  EmbeddingMatrix vectors;
  AttributeTable attrs;
  CapsIndex index;

  Fixture(size_t n, size_t d, size_t l, uint32_t cardinality, uint32_t b,
          uint32_t h, uint64_t seed)
      : vectors(test::random_vectors(n, d, seed)),
        attrs(test::random_attrs(n, l, cardinality, seed + 1)),
        index(CapsIndex::build(vectors, attrs,
                               make_config(b, h))) {}

  static CapsConfig make_config(uint32_t b, uint32_t h) {
    CapsConfig config;
    config.b = b;
    config.h = h;
    config.kmeans.iters = 6;
    return config;
  }
};

QueryFilter random_filter(Rng& rng, size_t l, uint32_t cardinality,
                          double absence) {
  std::vector<uint32_t> pattern(l);
  for (auto& v : pattern)
    v = rng.next_double() < absence
            ? kWildcard
            : static_cast<uint32_t>(rng.next_u64() % cardinality);
  return QueryFilter(pattern);
}

}  // namespace

TEST_CASE("build output satisfies the structural invariants") {
  Fixture fx(5000, 8, 3, 6, 16, 3, 1000);
  CHECK_NOTHROW(fx.index.audit_invariants());
  CHECK(fx.index.partition_count() == 16);
  CHECK(fx.index.height() == 3);

  auto sizes = fx.index.subpartition_sizes();
  uint64_t total = 0;
  for (uint64_t s : sizes) total += s;
  CHECK(total == fx.index.size());
}

TEST_CASE("build rejects broken inputs") {
  auto vectors = test::random_vectors(10, 4, 1);
  auto attrs = test::random_attrs(9, 2, 4, 2);
  CHECK_THROWS_AS(CapsIndex::build(vectors, attrs, Fixture::make_config(2, 1)),
                  InvalidArgument);

  EmbeddingMatrix no_vectors;
  AttributeTable no_attrs;
  CHECK_THROWS_AS(
      CapsIndex::build(no_vectors, no_attrs, Fixture::make_config(1, 1)),
      InvalidArgument);

  auto wild = test::random_attrs(10, 2, 4, 3);
  wild.row(4)[1] = kWildcard;
  CHECK_THROWS_AS(CapsIndex::build(vectors, wild, Fixture::make_config(2, 1)),
                  DataError);
}

TEST_CASE("exhaustive search at m=B matches the oracle exactly") {
  Fixture fx(2000, 16, 3, 8, 16, 3, 2000);
  Rng rng(2024);
  SearchOptions opts;
  opts.exhaustive_subpartitions = true;
  for (int trial = 0; trial < 200; ++trial) {
    auto q = test::random_vectors(1, 16, rng.next_u64());
    QueryFilter f = random_filter(rng, 3, 8, 0.3);
    SearchResult got =
        fx.index.search(q.row_span(0), f, 25, fx.index.partition_count(), opts);
    GroundTruthRow want =
        ground_truth(fx.vectors, fx.attrs, q.row(0), f, 25, Metric::SquaredEuclidean);
    CHECK(got.ids == want.ids);
  }
}

TEST_CASE("filter with no matching rows returns empty at zero distance cost") {
  Fixture fx(1000, 8, 2, 5, 8, 2, 3000);
  QueryFilter f({7, 9});  // values outside the generated cardinality
  auto q = test::random_vectors(1, 8, 77);
  SearchResult res = fx.index.search(q.row_span(0), f, 10,
                                     fx.index.partition_count());
  CHECK(res.ids.empty());
  CHECK(res.stats.distance_computations == 0);
}

TEST_CASE("all-wildcard filter with h=0 and m=B equals unfiltered exact kNN") {
  Fixture fx(1500, 12, 2, 4, 8, 0, 4000);
  auto queries = test::random_vectors(20, 12, 4001);
  QueryFilter f = QueryFilter::all_wildcard(2);
  for (size_t i = 0; i < queries.size(); ++i) {
    SearchResult got = fx.index.search(queries.row_span(i), f, 10,
                                       fx.index.partition_count());
    auto want = ref::exact_filtered_topk_twopass(fx.vectors, fx.attrs,
                                                 queries.row(i), f, 10,
                                                 Metric::SquaredEuclidean);
    REQUIRE(got.ids.size() == want.size());
    for (size_t j = 0; j < want.size(); ++j) CHECK(got.ids[j] == want[j].id);
  }
}

TEST_CASE("h=0 degenerates to plain IVF remainder scans") {
  Fixture fx(800, 8, 2, 4, 8, 0, 5000);
  for (uint32_t bin = 0; bin < fx.index.partition_count(); ++bin)
    CHECK(fx.index.aft(bin).leaf_count() == 0);

  // candidates at m=1 are exactly the nearest partition's members
  auto q = test::random_vectors(1, 8, 5001);
  std::vector<uint32_t> candidates;
  SearchOptions opts;
  opts.candidates_out = &candidates;
  fx.index.search(q.row_span(0), QueryFilter::all_wildcard(2), 5, 1, opts);
  uint32_t bin = fx.index.model().top_m(q.row(0), 1)[0];
  CHECK(candidates.size() == fx.index.aft(bin).remainder().size());
}

TEST_CASE("B=1 with m=1 scans the selected sub-partitions of everything") {
  Fixture fx(500, 6, 2, 3, 1, 2, 6000);
  auto q = test::random_vectors(1, 6, 6001);
  SearchOptions opts;
  opts.exhaustive_subpartitions = true;
  SearchResult res =
      fx.index.search(q.row_span(0), QueryFilter::all_wildcard(2), 5, 1, opts);
  CHECK(res.stats.candidates_scanned == fx.index.size());
}

TEST_CASE("counter ordering holds on every query") {
  Fixture fx(2000, 8, 3, 6, 16, 4, 7000);
  Rng rng(7001);
  for (int trial = 0; trial < 100; ++trial) {
    auto q = test::random_vectors(1, 8, rng.next_u64());
    QueryFilter f = random_filter(rng, 3, 6, 0.25);
    uint32_t m = 1 + static_cast<uint32_t>(rng.next_u64() % 16);
    SearchResult res = fx.index.search(q.row_span(0), f, 10, m);
    CHECK(res.stats.distance_computations <= res.stats.filter_passes);
    CHECK(res.stats.filter_passes <= res.stats.candidates_scanned);
  }
}

TEST_CASE("no result ever violates its filter") {
  Fixture fx(3000, 8, 3, 6, 16, 3, 8000);
  Rng rng(8001);
  for (int trial = 0; trial < 200; ++trial) {
    auto q = test::random_vectors(1, 8, rng.next_u64());
    QueryFilter f = random_filter(rng, 3, 6, 0.4);
    uint32_t m = 1 + static_cast<uint32_t>(rng.next_u64() % 16);
    SearchResult res = fx.index.search(q.row_span(0), f, 20, m);
    for (uint32_t id : res.ids)
      CHECK(filter_matches(fx.attrs.row_span(id), f));
    for (size_t j = 1; j < res.scores.size(); ++j)
      CHECK(res.scores[j] >= res.scores[j - 1]);
  }
}

TEST_CASE("candidate sets are nested in m") {
  Fixture fx(2000, 8, 3, 6, 16, 3, 9000);
  Rng rng(9001);
  for (int trial = 0; trial < 30; ++trial) {
    auto q = test::random_vectors(1, 8, rng.next_u64());
    QueryFilter f = random_filter(rng, 3, 6, 0.3);
    std::set<uint32_t> previous;
    for (uint32_t m = 1; m <= fx.index.partition_count(); ++m) {
      std::vector<uint32_t> candidates;
      SearchOptions opts;
      opts.candidates_out = &candidates;
      fx.index.search(q.row_span(0), f, 10, m, opts);
      std::set<uint32_t> current(candidates.begin(), candidates.end());
      CHECK(std::includes(current.begin(), current.end(), previous.begin(),
                          previous.end()));
      previous = std::move(current);
    }
  }
}

TEST_CASE("insert: self retrieval at distance zero") {
  Fixture fx(600, 8, 2, 4, 8, 2, 10000);
  auto x = test::random_vectors(1, 8, 10001);
  std::vector<uint32_t> a = {2, 3};
  uint32_t id = fx.index.insert(x.row_span(0), a);
  CHECK(id == 600);

  SearchResult res = fx.index.search(x.row_span(0), QueryFilter({2, 3}), 1,
                                     fx.index.partition_count());
  REQUIRE(res.ids.size() == 1);
  CHECK(res.ids[0] == id);
  CHECK(res.scores[0] == 0.0f);
  CHECK_NOTHROW(fx.index.audit_invariants());
}

TEST_CASE("insert grows the earliest matching leaf and keeps invariants") {
  Fixture fx(1200, 8, 2, 3, 4, 3, 11000);
  uint32_t bin_with_leaf = kWildcard;
  for (uint32_t bin = 0; bin < fx.index.partition_count(); ++bin) {
    if (fx.index.aft(bin).leaf_count() > 0) {
      bin_with_leaf = bin;
      break;
    }
  }
  REQUIRE(bin_with_leaf != kWildcard);
  const Aft& aft = fx.index.aft(bin_with_leaf);
  AttrTag tag = aft.leaves()[0].tag;
  size_t leaf_size = aft.leaves()[0].members.size();

  // a vector at the centroid lands in that partition; attrs carry the tag
  std::vector<float> x(fx.index.model().centroid(bin_with_leaf),
                       fx.index.model().centroid(bin_with_leaf) + 8);
  std::vector<uint32_t> a(2, 999);  // 999 collides with no other tag
  a[tag.position] = tag.value;
  fx.index.insert(x, a);
  CHECK(fx.index.aft(bin_with_leaf).leaves()[0].members.size() == leaf_size + 1);
  CHECK_NOTHROW(fx.index.audit_invariants());
}

TEST_CASE("inserts into a tagless partition land in the remainder") {
  // all-distinct attribute rows: no tags anywhere
  const size_t n = 64;
  auto vectors = test::random_vectors(n, 4, 12000);
  std::vector<uint32_t> codes(n * 2);
  for (size_t i = 0; i < n; ++i) {
    codes[i * 2] = static_cast<uint32_t>(i);
    codes[i * 2 + 1] = static_cast<uint32_t>(1000 + i);
  }
  AttributeTable attrs(n, 2, std::move(codes));
  CapsIndex index = CapsIndex::build(vectors, attrs, Fixture::make_config(4, 3));
  for (uint32_t bin = 0; bin < 4; ++bin)
    REQUIRE(index.aft(bin).leaf_count() == 0);

  Rng rng(12001);
  for (int i = 0; i < 1000; ++i) {
    auto x = test::random_vectors(1, 4, rng.next_u64());
    std::vector<uint32_t> a = {static_cast<uint32_t>(5000 + i),
                               static_cast<uint32_t>(9000 + i)};
    index.insert(x.row_span(0), a);
  }
  CHECK(index.size() == n + 1000);
  CHECK_NOTHROW(index.audit_invariants());
  for (uint32_t bin = 0; bin < 4; ++bin)
    CHECK(index.aft(bin).leaf_count() == 0);
}

TEST_CASE("insert rejects wildcards and bad dimensions") {
  Fixture fx(200, 4, 2, 3, 2, 1, 13000);
  auto x = test::random_vectors(1, 4, 13001);
  std::vector<uint32_t> wild = {kWildcard, 1};
  CHECK_THROWS_AS(fx.index.insert(x.row_span(0), wild), DataError);
  std::vector<uint32_t> shorter = {1};
  CHECK_THROWS_AS(fx.index.insert(x.row_span(0), shorter), InvalidArgument);
}

TEST_CASE("save/load round trip preserves search behavior") {
  Fixture fx(1500, 8, 3, 6, 8, 3, 14000);
  std::string path = test::temp_path("roundtrip.caps");
  fx.index.save(path);
  CapsIndex loaded = CapsIndex::load(path);

  CHECK(loaded.size() == fx.index.size());
  CHECK(loaded.attr_precision_bytes() == fx.index.attr_precision_bytes());

  Rng rng(14001);
  for (int trial = 0; trial < 100; ++trial) {
    auto q = test::random_vectors(1, 8, rng.next_u64());
    QueryFilter f = random_filter(rng, 3, 6, 0.3);
    uint32_t m = 1 + static_cast<uint32_t>(rng.next_u64() % 8);
    SearchResult a = fx.index.search(q.row_span(0), f, 15, m);
    SearchResult b = loaded.search(q.row_span(0), f, 15, m);
    CHECK(a.ids == b.ids);
    CHECK(a.scores == b.scores);
  }
  std::filesystem::remove(path);
}

TEST_CASE("dataset-free save round trips with external data") {
  Fixture fx(700, 8, 2, 4, 8, 2, 15000);
  std::string path = test::temp_path("nodata.caps");
  fx.index.save(path, /*include_data=*/false);

  CHECK_THROWS_AS(CapsIndex::load(path), IoError);
  CapsIndex loaded = CapsIndex::load(path, fx.vectors, fx.attrs);
  auto q = test::random_vectors(1, 8, 15001);
  QueryFilter f = QueryFilter::all_wildcard(2);
  SearchResult a = fx.index.search(q.row_span(0), f, 5, 8);
  SearchResult b = loaded.search(q.row_span(0), f, 5, 8);
  CHECK(a.ids == b.ids);
  std::filesystem::remove(path);
}

TEST_CASE("serialized size matches the closed form exactly") {
  Fixture fx(900, 10, 3, 5, 8, 4, 16000);
  std::string path = test::temp_path("size.caps");

  analysis::CostModelParams params;
  params.n = fx.index.size();
  params.d = 10;
  params.l = 3;
  params.b = fx.index.partition_count();
  params.h = fx.index.height();
  params.r = fx.index.attr_precision_bytes();

  fx.index.save(path, /*include_data=*/false);
  uint64_t overhead_size = std::filesystem::file_size(path);
  CHECK(overhead_size - CapsIndex::kHeaderBytes ==
        analysis::estimate_index_size(params, false));
  CHECK(fx.index.serialized_overhead_bytes() ==
        analysis::estimate_index_size(params, false));

  fx.index.save(path, /*include_data=*/true);
  uint64_t full_size = std::filesystem::file_size(path);
  CHECK(full_size - CapsIndex::kHeaderBytes ==
        analysis::estimate_index_size(params, true));
  std::filesystem::remove(path);
}

TEST_CASE("truncated and corrupted files are rejected without partial state") {
  Fixture fx(400, 6, 2, 4, 4, 2, 17000);
  std::string path = test::temp_path("corrupt.caps");
  fx.index.save(path);
  auto full = std::filesystem::file_size(path);

  auto truncate_to = [&](size_t bytes) {
    std::filesystem::resize_file(path, bytes);
  };

  SUBCASE("mid-header truncation") {
    truncate_to(10);
    CHECK_THROWS_AS(CapsIndex::load(path), IoError);
  }
  SUBCASE("mid-payload truncation") {
    truncate_to(full / 2);
    CHECK_THROWS_AS(CapsIndex::load(path), IoError);
  }
  SUBCASE("single corrupted byte fails the checksum") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(full - 9));
    char byte;
    f.seekg(static_cast<std::streamoff>(full - 9));
    f.read(&byte, 1);
    byte = static_cast<char>(byte ^ 0x40);
    f.seekp(static_cast<std::streamoff>(full - 9));
    f.write(&byte, 1);
    f.close();
    CHECK_THROWS_AS(CapsIndex::load(path), IoError);
  }
  SUBCASE("foreign magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("NOPE", 4);
    f.close();
    CHECK_THROWS_AS(CapsIndex::load(path), IoError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("search argument validation") {
  Fixture fx(300, 4, 2, 3, 4, 1, 18000);
  auto q = test::random_vectors(1, 4, 18001);
  QueryFilter f = QueryFilter::all_wildcard(2);
  CHECK_THROWS_AS(fx.index.search(q.row_span(0), f, 0, 1), InvalidArgument);
  CHECK_THROWS_AS(fx.index.search(q.row_span(0), f, 5, 0), InvalidArgument);
  CHECK_THROWS_AS(fx.index.search(q.row_span(0), f, 5, 5), InvalidArgument);
  QueryFilter bad = QueryFilter::all_wildcard(3);
  CHECK_THROWS_AS(fx.index.search(q.row_span(0), bad, 5, 1), InvalidArgument);
  auto wrong_dim = test::random_vectors(1, 5, 18002);
  CHECK_THROWS_AS(fx.index.search(wrong_dim.row_span(0), f, 5, 1),
                  InvalidArgument);
}

TEST_CASE("k larger than the match count returns fewer results") {
  Fixture fx(500, 6, 2, 10, 4, 2, 19000);
  // count rows matching a rare-ish filter, then ask for more
  QueryFilter f({3, 7});
  size_t matches = 0;
  for (size_t i = 0; i < fx.attrs.size(); ++i)
    if (filter_matches(fx.attrs.row_span(i), f)) ++matches;
  auto q = test::random_vectors(1, 6, 19001);
  SearchOptions opts;
  opts.exhaustive_subpartitions = true;
  SearchResult res =
      fx.index.search(q.row_span(0), f, static_cast<uint32_t>(matches + 50),
                      fx.index.partition_count(), opts);
  CHECK(res.ids.size() == matches);
}
