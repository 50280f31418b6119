#include "caps/oracle.hpp"

#include <algorithm>
#include <filesystem>
#include <unordered_set>

#include "caps/binary_io.hpp"
#include "caps/reference.hpp"
#include "caps/topk.hpp"

namespace caps {

GroundTruthRow ground_truth(const EmbeddingMatrix& vectors,
                            const AttributeTable& attrs, const float* q,
                            const QueryFilter& f, uint32_t k, Metric metric) {
  if (vectors.size() != attrs.size())
    throw InvalidArgument("ground_truth: vectors/attrs size mismatch");
  if (f.pattern.size() != attrs.attr_count())
    throw InvalidArgument("ground_truth: filter length mismatch");
  if (k == 0) throw InvalidArgument("ground_truth: k must be >= 1");

  const size_t d = vectors.dim();
  const size_t l = attrs.attr_count();
  const uint32_t* pattern = f.pattern.data();

  BoundedTopK<double> topk(k);
  for (size_t i = 0; i < vectors.size(); ++i) {
    if (!filter_matches_unchecked(attrs.row(i), pattern, l)) continue;
    topk.push(ref::distance_f64(q, vectors.row(i), d, metric),
              static_cast<uint32_t>(i));
  }
  auto sorted = topk.take_sorted();
  GroundTruthRow row;
  row.ids.reserve(sorted.size());
  row.scores.reserve(sorted.size());
  for (const auto& [score, id] : sorted) {
    row.ids.push_back(id);
    row.scores.push_back(score);
  }
  return row;
}

std::vector<GroundTruthRow> ground_truth_batch(
    const EmbeddingMatrix& vectors, const AttributeTable& attrs,
    const EmbeddingMatrix& queries, std::span<const QueryFilter> filters,
    uint32_t k, Metric metric) {
  if (queries.size() != filters.size())
    throw InvalidArgument("ground_truth_batch: queries/filters size mismatch");
  if (queries.dim() != vectors.dim())
    throw InvalidArgument("ground_truth_batch: query dimension mismatch");
  std::vector<GroundTruthRow> rows(queries.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(queries.size()); ++i)
    rows[i] = ground_truth(vectors, attrs, queries.row(i), filters[i], k, metric);
  return rows;
}

double recall_at_k(std::span<const uint32_t> retrieved,
                   std::span<const uint32_t> truth, uint32_t k,
                   RecallDenominator denom) {
  if (k == 0) throw InvalidArgument("recall_at_k: k must be >= 1");
  std::unordered_set<uint32_t> truth_set(truth.begin(), truth.end());
  size_t hits = 0;
  for (uint32_t id : retrieved)
    if (truth_set.count(id)) ++hits;
  double base = (denom == RecallDenominator::K)
                    ? static_cast<double>(k)
                    : static_cast<double>(truth.size());
  if (base == 0.0) return truth.empty() ? 1.0 : 0.0;
  return static_cast<double>(hits) / base;
}

namespace {
constexpr char kGtMagic[4] = {'C', 'A', 'G', 'T'};
constexpr uint32_t kGtVersion = 1;
}  // namespace

uint64_t ground_truth_key(const EmbeddingMatrix& vectors,
                          const AttributeTable& attrs,
                          const EmbeddingMatrix& queries,
                          std::span<const QueryFilter> filters, uint32_t k,
                          Metric metric) {
  Fnv1a64 fnv;
  uint64_t n = vectors.size(), d = vectors.dim(), l = attrs.attr_count();
  uint64_t nq = queries.size();
  fnv.update_value(n);
  fnv.update_value(d);
  fnv.update_value(l);
  fnv.update_value(nq);
  fnv.update_value(k);
  fnv.update_value(static_cast<uint32_t>(metric));
  fnv.update(vectors.data(), n * d * sizeof(float));
  fnv.update(attrs.data(), n * l * sizeof(uint32_t));
  fnv.update(queries.data(), nq * queries.dim() * sizeof(float));
  for (const auto& f : filters)
    fnv.update(f.pattern.data(), f.pattern.size() * sizeof(uint32_t));
  return fnv.digest();
}

void save_ground_truth(const std::string& path,
                       std::span<const GroundTruthRow> rows, uint64_t key,
                       uint32_t k) {
  BinaryWriter w(path);
  w.write_bytes(kGtMagic, 4);
  w.write_value(kGtVersion);
  w.write_value(key);
  w.write_value(static_cast<uint64_t>(rows.size()));
  w.write_value(k);

  Fnv1a64 fnv;
  uint64_t checksum_pos = w.bytes_written();
  uint64_t placeholder = 0;
  w.write_value(placeholder);
  for (const auto& row : rows) {
    uint32_t count = static_cast<uint32_t>(row.ids.size());
    fnv.update_value(count);
    w.write_value(count);
    fnv.update(row.ids.data(), row.ids.size() * sizeof(uint32_t));
    w.write_array<uint32_t>(row.ids);
    fnv.update(row.scores.data(), row.scores.size() * sizeof(double));
    w.write_array<double>(row.scores);
  }
  uint64_t digest = fnv.digest();
  w.seek(checksum_pos);
  w.write_value(digest);
}

std::optional<std::vector<GroundTruthRow>> load_ground_truth(
    const std::string& path, uint64_t expected_key, uint32_t k) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  BinaryReader rd(path);
  char magic[4];
  rd.read_bytes(magic, 4);
  if (std::memcmp(magic, kGtMagic, 4) != 0)
    throw IoError("bad magic, not a ground-truth cache: " + path);
  if (rd.read_value<uint32_t>() != kGtVersion)
    throw IoError("unsupported ground-truth cache version: " + path);
  uint64_t key = rd.read_value<uint64_t>();
  uint64_t nq = rd.read_value<uint64_t>();
  uint32_t file_k = rd.read_value<uint32_t>();
  uint64_t checksum = rd.read_value<uint64_t>();
  if (key != expected_key || file_k != k) return std::nullopt;

  Fnv1a64 fnv;
  std::vector<GroundTruthRow> rows(nq);
  for (auto& row : rows) {
    uint32_t count = rd.read_value<uint32_t>();
    if (count > k) throw IoError("corrupt ground-truth cache row: " + path);
    fnv.update_value(count);
    row.ids = rd.read_array<uint32_t>(count);
    fnv.update(row.ids.data(), row.ids.size() * sizeof(uint32_t));
    row.scores = rd.read_array<double>(count);
    fnv.update(row.scores.data(), row.scores.size() * sizeof(double));
  }
  if (rd.remaining() != 0)
    throw IoError("trailing bytes in ground-truth cache: " + path);
  if (fnv.digest() != checksum)
    throw IoError("checksum mismatch in ground-truth cache: " + path);
  return rows;
}

}  // namespace caps
