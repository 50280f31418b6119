#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace caps {

// Reserved query-side code meaning "this position is unconstrained".
// Never appears in data attribute rows.
inline constexpr uint32_t kWildcard = std::numeric_limits<uint32_t>::max();

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Metric : uint32_t {
  SquaredEuclidean = 0,
  InnerProduct = 1,
  Cosine = 2,
};

const char* metric_name(Metric m);
Metric metric_from_name(const std::string& name);

/// Row-contiguous n x d matrix of 32-bit floats.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(size_t n, size_t d) : n_(n), d_(d), values_(n * d, 0.0f) {
    if (d == 0) throw InvalidArgument("EmbeddingMatrix: d must be > 0");
  }
  EmbeddingMatrix(size_t n, size_t d, std::vector<float> values)
      : n_(n), d_(d), values_(std::move(values)) {
    if (d == 0) throw InvalidArgument("EmbeddingMatrix: d must be > 0");
    if (values_.size() != n * d)
      throw InvalidArgument("EmbeddingMatrix: value count != n*d");
  }

  size_t size() const { return n_; }
  size_t dim() const { return d_; }
  bool empty() const { return n_ == 0; }

  const float* row(size_t i) const { return values_.data() + i * d_; }
  float* row(size_t i) { return values_.data() + i * d_; }
  std::span<const float> row_span(size_t i) const { return {row(i), d_}; }

  const float* data() const { return values_.data(); }
  float* data() { return values_.data(); }

  void append_row(std::span<const float> x) {
    if (d_ == 0) d_ = x.size();
    if (x.size() != d_)
      throw InvalidArgument("EmbeddingMatrix::append_row: dimension mismatch");
    values_.insert(values_.end(), x.begin(), x.end());
    ++n_;
  }

  /// Throws DataError on NaN/Inf entries.
  void validate_finite() const;

 private:
  size_t n_ = 0;
  size_t d_ = 0;
  std::vector<float> values_;
};

/// Row-contiguous n x l table of categorical attribute codes.
/// Codes are position-scoped: values at different positions are never compared.
class AttributeTable {
 public:
  AttributeTable() = default;
  AttributeTable(size_t n, size_t l) : n_(n), l_(l), values_(n * l, 0) {
    if (l == 0) throw InvalidArgument("AttributeTable: l must be > 0");
  }
  AttributeTable(size_t n, size_t l, std::vector<uint32_t> values)
      : n_(n), l_(l), values_(std::move(values)) {
    if (l == 0) throw InvalidArgument("AttributeTable: l must be > 0");
    if (values_.size() != n * l)
      throw InvalidArgument("AttributeTable: value count != n*l");
  }

  size_t size() const { return n_; }
  size_t attr_count() const { return l_; }
  bool empty() const { return n_ == 0; }

  const uint32_t* row(size_t i) const { return values_.data() + i * l_; }
  uint32_t* row(size_t i) { return values_.data() + i * l_; }
  std::span<const uint32_t> row_span(size_t i) const { return {row(i), l_}; }

  const uint32_t* data() const { return values_.data(); }
  uint32_t* data() { return values_.data(); }

  void append_row(std::span<const uint32_t> a) {
    if (l_ == 0) l_ = a.size();
    if (a.size() != l_)
      throw InvalidArgument("AttributeTable::append_row: length mismatch");
    values_.insert(values_.end(), a.begin(), a.end());
    ++n_;
  }

  /// Throws DataError if any data row contains kWildcard.
  void validate_no_wildcard() const;

  /// Total count of distinct (position, value) pairs over the table.
  uint64_t total_distinct_values() const;

 private:
  size_t n_ = 0;
  size_t l_ = 0;
  std::vector<uint32_t> values_;
};

/// Conjunctive equality pattern over L attribute positions.
/// A position holds either a required code or kWildcard.
struct QueryFilter {
  std::vector<uint32_t> pattern;

  QueryFilter() = default;
  explicit QueryFilter(std::vector<uint32_t> p) : pattern(std::move(p)) {}
  static QueryFilter all_wildcard(size_t l) {
    return QueryFilter(std::vector<uint32_t>(l, kWildcard));
  }

  size_t size() const { return pattern.size(); }
  size_t wildcard_count() const;
  bool fully_wildcard() const { return wildcard_count() == pattern.size(); }
};

/// True iff every non-wildcard position of f equals the row value.
/// Early exit on first mismatch. Throws on length mismatch.
bool filter_matches(std::span<const uint32_t> a, const QueryFilter& f);

/// Unchecked variant for hot loops; caller validated lengths once.
inline bool filter_matches_unchecked(const uint32_t* a, const uint32_t* pattern,
                                     size_t l) {
  for (size_t i = 0; i < l; ++i) {
    uint32_t want = pattern[i];
    if (want != kWildcard && want != a[i]) return false;
  }
  return true;
}

// Distance kernels. All scores are normalized lower-is-better:
// squared euclidean as-is, inner product and cosine negated.
float l2_sq(const float* x, const float* y, size_t d);
float inner_product(const float* x, const float* y, size_t d);
float l2_norm(const float* x, size_t d);

float distance(const float* x, const float* y, size_t d, Metric metric);

/// Checked entry point; throws InvalidArgument on dimension mismatch.
float distance(std::span<const float> x, std::span<const float> y,
               Metric metric);

}  // namespace caps
