#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "caps/core.hpp"
#include "caps/reference.hpp"
#include "test_util.hpp"

using namespace caps;

TEST_CASE("filter_matches basic semantics") {
  std::vector<uint32_t> a = {2, 5, 1};
  CHECK(filter_matches(a, QueryFilter({2, 5, 1})));
  CHECK(filter_matches(a, QueryFilter({2, kWildcard, 1})));
  CHECK_FALSE(filter_matches(a, QueryFilter({3, 5, 1})));
  CHECK(filter_matches(a, QueryFilter::all_wildcard(3)));
}

TEST_CASE("filter_matches length mismatch is a contract violation") {
  std::vector<uint32_t> a = {2, 5, 1};
  CHECK_THROWS_AS(filter_matches(a, QueryFilter({2, 5})), InvalidArgument);
}

TEST_CASE("all-wildcard filter matches every row") {
  auto attrs = test::random_attrs(500, 4, 9, 11);
  QueryFilter f = QueryFilter::all_wildcard(4);
  for (size_t i = 0; i < attrs.size(); ++i)
    CHECK(filter_matches(attrs.row_span(i), f));
}

TEST_CASE("filter_matches is monotone in wildcards") {
  auto attrs = test::random_attrs(300, 5, 6, 21);
  Rng rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<uint32_t> pattern(5);
    for (auto& v : pattern) {
      v = rng.next_double() < 0.3 ? kWildcard
                                  : static_cast<uint32_t>(rng.next_u64() % 6);
    }
    QueryFilter f(pattern);
    size_t row = rng.next_u64() % attrs.size();
    if (!filter_matches(attrs.row_span(row), f)) continue;
    // replacing any required position with a wildcard never flips to false
    for (size_t p = 0; p < pattern.size(); ++p) {
      if (pattern[p] == kWildcard) continue;
      QueryFilter widened(pattern);
      widened.pattern[p] = kWildcard;
      CHECK(filter_matches(attrs.row_span(row), widened));
    }
  }
}

TEST_CASE("distance trivia") {
  std::vector<float> x = {1, 2};
  CHECK(distance(x, x, Metric::SquaredEuclidean) == 0.0f);
  std::vector<float> o = {0, 0}, p = {3, 4};
  CHECK(distance(o, p, Metric::SquaredEuclidean) == 25.0f);
}

TEST_CASE("distance dimension mismatch throws") {
  std::vector<float> x = {1, 2, 3}, y = {1, 2};
  CHECK_THROWS_AS(distance(std::span<const float>(x), std::span<const float>(y),
                           Metric::SquaredEuclidean),
                  InvalidArgument);
}

TEST_CASE("kernels agree with the scalar double-precision reference") {
  const size_t d = 128;
  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<float> x(d), y(d);
    for (size_t j = 0; j < d; ++j) {
      x[j] = static_cast<float>(rng.next_gaussian());
      y[j] = static_cast<float>(rng.next_gaussian());
    }
    for (Metric m : {Metric::SquaredEuclidean, Metric::InnerProduct, Metric::Cosine}) {
      double got = distance(x.data(), y.data(), d, m);
      double want = ref::distance_f64(x.data(), y.data(), d, m);
      double rel = std::abs(got - want) / std::max(1.0, std::abs(want));
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("negated inner product preserves the descending-similarity ranking") {
  const size_t d = 16, n = 64;
  auto data = test::random_vectors(n, d, 5);
  auto q = test::random_vectors(1, d, 6);

  std::vector<uint32_t> by_negated(n), by_raw(n);
  std::iota(by_negated.begin(), by_negated.end(), 0);
  by_raw = by_negated;
  std::sort(by_negated.begin(), by_negated.end(), [&](uint32_t a, uint32_t b) {
    float da = distance(q.row(0), data.row(a), d, Metric::InnerProduct);
    float db = distance(q.row(0), data.row(b), d, Metric::InnerProduct);
    if (da != db) return da < db;
    return a < b;
  });
  std::sort(by_raw.begin(), by_raw.end(), [&](uint32_t a, uint32_t b) {
    float sa = inner_product(q.row(0), data.row(a), d);
    float sb = inner_product(q.row(0), data.row(b), d);
    if (sa != sb) return sa > sb;
    return a < b;
  });
  CHECK(by_negated == by_raw);
}

TEST_CASE("wildcard never appears in generated data tables") {
  auto attrs = test::random_attrs(1000, 3, 50, 99);
  CHECK_NOTHROW(attrs.validate_no_wildcard());
}

TEST_CASE("embedding matrix rejects non-finite input") {
  EmbeddingMatrix m(2, 2);
  m.row(1)[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(m.validate_finite(), DataError);
}
