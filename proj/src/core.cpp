#include "caps/core.hpp"

#include <unordered_set>

namespace caps {

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::SquaredEuclidean:
      return "l2";
    case Metric::InnerProduct:
      return "ip";
    case Metric::Cosine:
      return "cosine";
  }
  return "unknown";
}

Metric metric_from_name(const std::string& name) {
  if (name == "l2" || name == "squared-euclidean") return Metric::SquaredEuclidean;
  if (name == "ip" || name == "inner-product") return Metric::InnerProduct;
  if (name == "cosine") return Metric::Cosine;
  throw InvalidArgument("unknown metric: " + name);
}

void EmbeddingMatrix::validate_finite() const {
  for (size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      throw DataError("EmbeddingMatrix: non-finite value at flat index " +
                      std::to_string(i));
  }
}

void AttributeTable::validate_no_wildcard() const {
  for (size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] == kWildcard)
      throw DataError("AttributeTable: wildcard code in data row " +
                      std::to_string(i / l_));
  }
}

uint64_t AttributeTable::total_distinct_values() const {
  uint64_t total = 0;
  std::unordered_set<uint32_t> seen;
  for (size_t p = 0; p < l_; ++p) {
    seen.clear();
    for (size_t i = 0; i < n_; ++i) seen.insert(values_[i * l_ + p]);
    total += seen.size();
  }
  return total;
}

size_t QueryFilter::wildcard_count() const {
  size_t c = 0;
  for (uint32_t v : pattern)
    if (v == kWildcard) ++c;
  return c;
}

bool filter_matches(std::span<const uint32_t> a, const QueryFilter& f) {
  if (a.size() != f.pattern.size())
    throw InvalidArgument("filter_matches: row has " + std::to_string(a.size()) +
                          " positions, filter has " +
                          std::to_string(f.pattern.size()));
  return filter_matches_unchecked(a.data(), f.pattern.data(), a.size());
}

// Four-way unrolled accumulators: deterministic order, enough ILP to keep
// the FPU busy without -ffast-math reassociation.
float l2_sq(const float* x, const float* y, size_t d) {
  float acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
  size_t i = 0;
  for (; i + 4 <= d; i += 4) {
    float d0 = x[i] - y[i];
    float d1 = x[i + 1] - y[i + 1];
    float d2 = x[i + 2] - y[i + 2];
    float d3 = x[i + 3] - y[i + 3];
    acc0 += d0 * d0;
    acc1 += d1 * d1;
    acc2 += d2 * d2;
    acc3 += d3 * d3;
  }
  for (; i < d; ++i) {
    float di = x[i] - y[i];
    acc0 += di * di;
  }
  return (acc0 + acc1) + (acc2 + acc3);
}

float inner_product(const float* x, const float* y, size_t d) {
  float acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
  size_t i = 0;
  for (; i + 4 <= d; i += 4) {
    acc0 += x[i] * y[i];
    acc1 += x[i + 1] * y[i + 1];
    acc2 += x[i + 2] * y[i + 2];
    acc3 += x[i + 3] * y[i + 3];
  }
  for (; i < d; ++i) acc0 += x[i] * y[i];
  return (acc0 + acc1) + (acc2 + acc3);
}

float l2_norm(const float* x, size_t d) {
  return std::sqrt(inner_product(x, x, d));
}

float distance(const float* x, const float* y, size_t d, Metric metric) {
  switch (metric) {
    case Metric::SquaredEuclidean:
      return l2_sq(x, y, d);
    case Metric::InnerProduct:
      return -inner_product(x, y, d);
    case Metric::Cosine: {
      float nx = l2_norm(x, d);
      float ny = l2_norm(y, d);
      if (nx == 0.0f || ny == 0.0f) return 0.0f;
      return -inner_product(x, y, d) / (nx * ny);
    }
  }
  throw InvalidArgument("distance: unknown metric");
}

float distance(std::span<const float> x, std::span<const float> y,
               Metric metric) {
  if (x.size() != y.size())
    throw InvalidArgument("distance: dimension mismatch (" +
                          std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  return distance(x.data(), y.data(), x.size(), metric);
}

}  // namespace caps
