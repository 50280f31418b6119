#include "caps/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "caps/analysis.hpp"
#include "caps/binary_io.hpp"
#include "caps/topk.hpp"

namespace caps {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'P', 'S'};
constexpr uint32_t kFlagHasData = 1u << 0;

// Smallest byte width r with value <= 2^(8r) - 2, so the all-ones sentinel
// never collides with a real tag.
uint32_t needed_precision_bytes(uint64_t max_value) {
  for (uint32_t r = 1; r < 8; ++r) {
    uint64_t limit = (1ULL << (8 * r)) - 2;
    if (max_value <= limit) return r;
  }
  return 8;
}

uint64_t max_attr_code(const AttributeTable& attrs) {
  uint64_t m = 0;
  const uint32_t* v = attrs.data();
  for (size_t i = 0; i < attrs.size() * attrs.attr_count(); ++i)
    m = std::max<uint64_t>(m, v[i]);
  return m;
}

void write_le(std::vector<uint8_t>& buf, uint64_t value, uint32_t bytes) {
  for (uint32_t i = 0; i < bytes; ++i)
    buf.push_back(static_cast<uint8_t>((value >> (8 * i)) & 0xFF));
}

uint64_t read_le(const uint8_t* p, uint32_t bytes) {
  uint64_t v = 0;
  for (uint32_t i = 0; i < bytes; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

struct Header {
  uint32_t version = CapsIndex::kFormatVersion;
  uint32_t flags = 0;
  uint64_t n = 0;
  uint32_t d = 0;
  uint32_t l = 0;
  uint32_t b = 0;
  uint32_t h = 0;
  uint32_t metric = 0;
  uint32_t r = 0;
  uint64_t tombstone_reserved = 0;
  uint64_t checksum = 0;
};

void write_header(BinaryWriter& w, const Header& hd) {
  w.write_bytes(kMagic, 4);
  w.write_value(hd.version);
  w.write_value(hd.flags);
  w.write_value(hd.n);
  w.write_value(hd.d);
  w.write_value(hd.l);
  w.write_value(hd.b);
  w.write_value(hd.h);
  w.write_value(hd.metric);
  w.write_value(hd.r);
  w.write_value(hd.tombstone_reserved);
  w.write_value(hd.checksum);
  uint32_t pad = 0;
  w.write_value(pad);
}

Header read_header(BinaryReader& rd, const std::string& path) {
  if (rd.file_size() < CapsIndex::kHeaderBytes)
    throw IoError("truncated file (no full header): " + path);
  char magic[4];
  rd.read_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("bad magic, not a CAPS index: " + path);
  Header hd;
  hd.version = rd.read_value<uint32_t>();
  if (hd.version != CapsIndex::kFormatVersion)
    throw IoError("unsupported index version " + std::to_string(hd.version));
  hd.flags = rd.read_value<uint32_t>();
  hd.n = rd.read_value<uint64_t>();
  hd.d = rd.read_value<uint32_t>();
  hd.l = rd.read_value<uint32_t>();
  hd.b = rd.read_value<uint32_t>();
  hd.h = rd.read_value<uint32_t>();
  hd.metric = rd.read_value<uint32_t>();
  hd.r = rd.read_value<uint32_t>();
  hd.tombstone_reserved = rd.read_value<uint64_t>();
  hd.checksum = rd.read_value<uint64_t>();
  rd.read_value<uint32_t>();  // pad
  if (hd.b == 0 || hd.d == 0 || hd.l == 0 || hd.n == 0)
    throw IoError("corrupt header counts: " + path);
  if (hd.r < 1 || hd.r > 8) throw IoError("corrupt header precision: " + path);
  if (hd.metric > 2) throw IoError("corrupt header metric: " + path);
  return hd;
}

}  // namespace

uint32_t default_partition_count(size_t n) {
  if (n <= 1) return 1;
  double root = std::ceil(std::sqrt(static_cast<double>(n)));
  uint32_t lo = 1;
  while (static_cast<double>(lo) * 2.0 <= root) lo *= 2;
  uint32_t hi = lo * 2;
  uint32_t b = (root / lo <= static_cast<double>(hi) / root) ? lo : hi;
  while (b > n) b /= 2;
  return std::max(1u, b);
}

CapsIndex CapsIndex::build(EmbeddingMatrix vectors, AttributeTable attrs,
                           const CapsConfig& config) {
  if (vectors.size() == 0) throw InvalidArgument("build: empty dataset");
  if (vectors.size() != attrs.size())
    throw InvalidArgument("build: vectors and attributes disagree on n (" +
                          std::to_string(vectors.size()) + " vs " +
                          std::to_string(attrs.size()) + ")");
  attrs.validate_no_wildcard();

  CapsIndex index;
  index.vectors_ = std::move(vectors);
  index.attrs_ = std::move(attrs);
  index.h_ = config.h;
  index.metric_ = config.metric;

  uint32_t b = config.b ? config.b : default_partition_count(index.vectors_.size());
  KMeansConfig km = config.kmeans;
  km.metric = config.metric;
  index.model_ = train(index.vectors_, b, km);

  std::vector<uint32_t> assignment = assign_all(index.model_, index.vectors_);
  std::vector<std::vector<uint32_t>> members(b);
  for (size_t i = 0; i < assignment.size(); ++i)
    members[assignment[i]].push_back(static_cast<uint32_t>(i));

  index.afts_.resize(b);
#pragma omp parallel for schedule(dynamic)
  for (int64_t bin = 0; bin < static_cast<int64_t>(b); ++bin)
    index.afts_[bin] = Aft::build(members[bin], index.attrs_, config.h);

  uint32_t formula_r = analysis::attribute_precision_bytes(
      index.attrs_.total_distinct_values());
  uint64_t max_needed = std::max<uint64_t>(max_attr_code(index.attrs_),
                                           index.attrs_.attr_count() - 1);
  index.r_ = std::max(formula_r, needed_precision_bytes(max_needed));
  return index;
}

SearchResult CapsIndex::search(std::span<const float> q, const QueryFilter& f,
                               uint32_t k, uint32_t m,
                               const SearchOptions& opts) const {
  if (q.size() != dim()) throw InvalidArgument("search: query dimension mismatch");
  if (f.pattern.size() != attr_count())
    throw InvalidArgument("search: filter length mismatch");
  if (k == 0) throw InvalidArgument("search: k must be >= 1");
  if (m == 0 || m > partition_count())
    throw InvalidArgument("search: m must be in [1, B]");

  const size_t d = dim();
  const size_t l = attr_count();
  const uint32_t* pattern = f.pattern.data();

  SearchResult result;
  BoundedTopK<float> topk(k);
  SearchStats& st = result.stats;

  // Attribute check first, distance only for filter survivors.
  auto scan_interleaved = [&](const std::vector<uint32_t>& ids) {
    for (uint32_t id : ids) {
      ++st.candidates_scanned;
      if (opts.candidates_out) opts.candidates_out->push_back(id);
      if (!filter_matches_unchecked(attrs_.row(id), pattern, l)) continue;
      ++st.filter_passes;
      float s = distance(q.data(), vectors_.row(id), d, metric_);
      ++st.distance_computations;
      topk.push(s, id);
    }
  };

  // IVF baseline: distance for everything, filter applied afterwards.
  auto scan_postfilter = [&](const std::vector<uint32_t>& ids) {
    for (uint32_t id : ids) {
      ++st.candidates_scanned;
      if (opts.candidates_out) opts.candidates_out->push_back(id);
      float s = distance(q.data(), vectors_.row(id), d, metric_);
      ++st.distance_computations;
      if (!filter_matches_unchecked(attrs_.row(id), pattern, l)) continue;
      ++st.filter_passes;
      topk.push(s, id);
    }
  };

  std::vector<uint32_t> bins = model_.top_m(q.data(), m);
  for (uint32_t bin : bins) {
    const Aft& aft = afts_[bin];
    if (opts.postfilter) {
      for (const auto& leaf : aft.leaves()) scan_postfilter(leaf.members);
      scan_postfilter(aft.remainder());
    } else if (opts.exhaustive_subpartitions) {
      for (const auto& leaf : aft.leaves()) scan_interleaved(leaf.members);
      scan_interleaved(aft.remainder());
    } else {
      SubPartitionSelection sel = aft.lookup(f);
      for (uint32_t j : sel.leaf_indices) scan_interleaved(aft.leaves()[j].members);
      if (sel.include_remainder) scan_interleaved(aft.remainder());
    }
  }

  auto sorted = topk.take_sorted();
  result.ids.reserve(sorted.size());
  result.scores.reserve(sorted.size());
  for (const auto& [score, id] : sorted) {
    result.ids.push_back(id);
    result.scores.push_back(score);
  }
  return result;
}

uint32_t CapsIndex::insert(std::span<const float> x, std::span<const uint32_t> a) {
  if (x.size() != dim()) throw InvalidArgument("insert: vector dimension mismatch");
  if (a.size() != attr_count())
    throw InvalidArgument("insert: attribute length mismatch");
  for (uint32_t v : a)
    if (v == kWildcard) throw DataError("insert: wildcard in data attributes");

  uint32_t id = static_cast<uint32_t>(size());
  vectors_.append_row(x);
  attrs_.append_row(a);

  uint32_t bin = model_.assign(x.data());
  Aft& aft = afts_[bin];
  uint32_t slot = aft.route(a);
  if (slot < aft.leaf_count())
    aft.leaves()[slot].members.push_back(id);
  else
    aft.remainder().push_back(id);

  uint64_t max_code = 0;
  for (uint32_t v : a) max_code = std::max<uint64_t>(max_code, v);
  r_ = std::max(r_, needed_precision_bytes(max_code));
  return id;
}

uint64_t CapsIndex::serialized_overhead_bytes() const {
  const uint64_t b = partition_count();
  const uint64_t slots = b * (static_cast<uint64_t>(h_) + 1);
  return 4 * b * dim() + 4 * slots + 4 * static_cast<uint64_t>(size()) +
         2 * slots * r_;
}

std::vector<uint64_t> CapsIndex::subpartition_sizes() const {
  const uint32_t b = partition_count();
  std::vector<uint64_t> sizes(static_cast<size_t>(b) * (h_ + 1), 0);
  for (uint32_t bin = 0; bin < b; ++bin) {
    const Aft& aft = afts_[bin];
    size_t base = static_cast<size_t>(bin) * (h_ + 1);
    for (size_t j = 0; j < aft.leaf_count(); ++j)
      sizes[base + j] = aft.leaves()[j].members.size();
    sizes[base + h_] = aft.remainder().size();
  }
  return sizes;
}

void CapsIndex::audit_invariants() const {
  std::vector<uint8_t> seen(size(), 0);
  uint64_t total = 0;
  for (uint32_t bin = 0; bin < partition_count(); ++bin) {
    const Aft& aft = afts_[bin];
    if (aft.leaf_count() > h_)
      throw DataError("audit: partition has more leaves than h");
    for (size_t j = 0; j < aft.leaf_count(); ++j) {
      const auto& leaf = aft.leaves()[j];
      for (uint32_t id : leaf.members) {
        if (id >= size() || seen[id]++)
          throw DataError("audit: duplicate or out-of-range member id");
        ++total;
        if (attrs_.row(id)[leaf.tag.position] != leaf.tag.value)
          throw DataError("audit: leaf purity violated");
        for (size_t j2 = 0; j2 < j; ++j2) {
          const AttrTag& earlier = aft.leaves()[j2].tag;
          if (attrs_.row(id)[earlier.position] == earlier.value)
            throw DataError("audit: leaf exclusion violated");
        }
      }
    }
    for (uint32_t id : aft.remainder()) {
      if (id >= size() || seen[id]++)
        throw DataError("audit: duplicate or out-of-range member id");
      ++total;
      for (const auto& leaf : aft.leaves()) {
        if (attrs_.row(id)[leaf.tag.position] == leaf.tag.value)
          throw DataError("audit: remainder member matches a leaf tag");
      }
    }
  }
  if (total != size()) throw DataError("audit: cover incomplete");
}

void CapsIndex::save(const std::string& path, bool include_data) const {
  const uint64_t b = partition_count();
  const uint64_t slots = b * (static_cast<uint64_t>(h_) + 1);
  const uint64_t n = size();
  const uint32_t r = r_;

  Header hd;
  hd.flags = include_data ? kFlagHasData : 0;
  hd.n = n;
  hd.d = static_cast<uint32_t>(dim());
  hd.l = static_cast<uint32_t>(attr_count());
  hd.b = static_cast<uint32_t>(b);
  hd.h = h_;
  hd.metric = static_cast<uint32_t>(metric_);
  hd.r = r;

  // CSR over all B*(h+1) sub-partition slots, partition-major; cumulative
  // end offsets, remainder in slot h. Untagged slots carry an all-ones tag.
  std::vector<uint32_t> ends;
  std::vector<uint32_t> flat_ids;
  std::vector<uint8_t> tags;
  ends.reserve(slots);
  flat_ids.reserve(n);
  tags.reserve(slots * 2 * r);
  for (uint64_t bin = 0; bin < b; ++bin) {
    const Aft& aft = afts_[bin];
    for (uint32_t j = 0; j < h_; ++j) {
      if (j < aft.leaf_count()) {
        const auto& leaf = aft.leaves()[j];
        flat_ids.insert(flat_ids.end(), leaf.members.begin(), leaf.members.end());
        write_le(tags, leaf.tag.position, r);
        write_le(tags, leaf.tag.value, r);
      } else {
        for (uint32_t i = 0; i < 2 * r; ++i) tags.push_back(0xFF);
      }
      ends.push_back(static_cast<uint32_t>(flat_ids.size()));
    }
    flat_ids.insert(flat_ids.end(), aft.remainder().begin(), aft.remainder().end());
    for (uint32_t i = 0; i < 2 * r; ++i) tags.push_back(0xFF);
    ends.push_back(static_cast<uint32_t>(flat_ids.size()));
  }

  std::vector<uint8_t> attr_block;
  if (include_data) {
    attr_block.reserve(n * attr_count() * r);
    const uint32_t* codes = attrs_.data();
    for (size_t i = 0; i < n * attr_count(); ++i) write_le(attr_block, codes[i], r);
  }

  BinaryWriter w(path);
  write_header(w, hd);  // checksum patched below

  Fnv1a64 fnv;
  auto put = [&](const void* data, size_t bytes) {
    fnv.update(data, bytes);
    w.write_bytes(data, bytes);
  };
  put(model_.centroids().data(), model_.centroids().size() * sizeof(float));
  put(ends.data(), ends.size() * sizeof(uint32_t));
  put(flat_ids.data(), flat_ids.size() * sizeof(uint32_t));
  put(tags.data(), tags.size());
  if (include_data) {
    put(vectors_.data(), n * dim() * sizeof(float));
    put(attr_block.data(), attr_block.size());
  }

  hd.checksum = fnv.digest();
  w.seek(0);
  write_header(w, hd);
}

CapsIndex CapsIndex::load(const std::string& path) {
  return load_impl(path, nullptr, nullptr);
}

CapsIndex CapsIndex::load(const std::string& path, EmbeddingMatrix vectors,
                          AttributeTable attrs) {
  return load_impl(path, &vectors, &attrs);
}

CapsIndex CapsIndex::load_impl(const std::string& path, EmbeddingMatrix* vectors_in,
                               AttributeTable* attrs_in) {
  BinaryReader rd(path);
  Header hd = read_header(rd, path);

  const uint64_t slots = static_cast<uint64_t>(hd.b) * (hd.h + 1);
  const bool has_data = (hd.flags & kFlagHasData) != 0;
  uint64_t expected = 4ULL * hd.b * hd.d + 4ULL * slots + 4ULL * hd.n +
                      2ULL * slots * hd.r;
  if (has_data) expected += 4ULL * hd.n * hd.d + hd.n * hd.l * hd.r;
  if (rd.remaining() != expected)
    throw IoError("truncated or oversized index payload: " + path + " (expect " +
                  std::to_string(expected) + " bytes, have " +
                  std::to_string(rd.remaining()) + ")");

  Fnv1a64 fnv;
  std::vector<float> centroids =
      rd.read_array<float>(static_cast<size_t>(hd.b) * hd.d);
  fnv.update(centroids.data(), centroids.size() * sizeof(float));
  std::vector<uint32_t> ends = rd.read_array<uint32_t>(slots);
  fnv.update(ends.data(), ends.size() * sizeof(uint32_t));
  std::vector<uint32_t> flat_ids = rd.read_array<uint32_t>(hd.n);
  fnv.update(flat_ids.data(), flat_ids.size() * sizeof(uint32_t));
  std::vector<uint8_t> tags = rd.read_array<uint8_t>(slots * 2 * hd.r);
  fnv.update(tags.data(), tags.size());

  EmbeddingMatrix vectors;
  AttributeTable attrs;
  if (has_data) {
    std::vector<float> vbuf = rd.read_array<float>(hd.n * hd.d);
    fnv.update(vbuf.data(), vbuf.size() * sizeof(float));
    std::vector<uint8_t> abuf = rd.read_array<uint8_t>(hd.n * hd.l * hd.r);
    fnv.update(abuf.data(), abuf.size());
    vectors = EmbeddingMatrix(hd.n, hd.d, std::move(vbuf));
    std::vector<uint32_t> codes(hd.n * hd.l);
    for (size_t i = 0; i < codes.size(); ++i)
      codes[i] = static_cast<uint32_t>(read_le(abuf.data() + i * hd.r, hd.r));
    attrs = AttributeTable(hd.n, hd.l, std::move(codes));
  } else {
    if (!vectors_in || !attrs_in)
      throw IoError(
          "index file has no embedded dataset; pass vectors and attributes: " +
          path);
    vectors = std::move(*vectors_in);
    attrs = std::move(*attrs_in);
    if (vectors.size() != hd.n || vectors.dim() != hd.d ||
        attrs.size() != hd.n || attrs.attr_count() != hd.l)
      throw InvalidArgument("load: supplied dataset does not match index header");
  }

  if (fnv.digest() != hd.checksum)
    throw IoError("checksum mismatch, corrupted index: " + path);

  // Rebuild per-partition trees from the CSR slots.
  const uint64_t sentinel =
      (hd.r >= 8) ? UINT64_MAX : (1ULL << (8 * hd.r)) - 1;
  std::vector<Aft> afts(hd.b);
  uint64_t start = 0;
  for (uint32_t bin = 0; bin < hd.b; ++bin) {
    std::vector<Aft::Leaf> leaves;
    std::vector<uint32_t> remainder;
    bool truncated = false;
    for (uint32_t j = 0; j <= hd.h; ++j) {
      uint64_t slot = static_cast<uint64_t>(bin) * (hd.h + 1) + j;
      uint64_t end = ends[slot];
      if (end < start || end > hd.n)
        throw IoError("corrupt CSR offsets in index: " + path);
      std::vector<uint32_t> ids(flat_ids.begin() + static_cast<ptrdiff_t>(start),
                                flat_ids.begin() + static_cast<ptrdiff_t>(end));
      for (uint32_t id : ids)
        if (id >= hd.n) throw IoError("corrupt member id in index: " + path);
      start = end;
      if (j == hd.h) {
        remainder = std::move(ids);
        break;
      }
      const uint8_t* tag_ptr = tags.data() + slot * 2 * hd.r;
      uint64_t pos = read_le(tag_ptr, hd.r);
      uint64_t val = read_le(tag_ptr + hd.r, hd.r);
      if (pos == sentinel && val == sentinel) {
        if (!ids.empty())
          throw IoError("corrupt index: members in an untagged slot: " + path);
        truncated = true;
        continue;
      }
      if (truncated)
        throw IoError("corrupt index: tagged slot after truncation: " + path);
      if (pos >= hd.l)
        throw IoError("corrupt index: tag position out of range: " + path);
      leaves.push_back(Aft::Leaf{
          AttrTag{static_cast<uint32_t>(pos), static_cast<uint32_t>(val)},
          std::move(ids)});
    }
    afts[bin] = Aft::from_parts(std::move(leaves), std::move(remainder));
  }
  if (start != hd.n) throw IoError("corrupt CSR offsets in index: " + path);

  CapsIndex index;
  index.model_ = PartitionModel(hd.b, hd.d, static_cast<Metric>(hd.metric),
                                std::move(centroids), std::nullopt);
  index.afts_ = std::move(afts);
  index.vectors_ = std::move(vectors);
  index.attrs_ = std::move(attrs);
  index.h_ = hd.h;
  index.metric_ = static_cast<Metric>(hd.metric);
  index.r_ = hd.r;
  return index;
}

}  // namespace caps
