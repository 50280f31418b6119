#include "caps/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "caps/binary_io.hpp"

namespace caps {

double Rng::next_gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = next_double();
  double u2 = next_double();
  while (u1 <= 0.0) u1 = next_double();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

std::vector<uint32_t> AttributeSpec::effective_cardinalities() const {
  if (!cardinalities.empty()) {
    if (cardinalities.size() != l)
      throw InvalidArgument("AttributeSpec: cardinalities must have L entries");
    for (uint32_t c : cardinalities)
      if (c < 1) throw InvalidArgument("AttributeSpec: cardinality must be >= 1");
    return cardinalities;
  }
  return std::vector<uint32_t>(l, 12);
}

std::vector<double> AttributeSpec::value_probabilities(uint32_t c) const {
  std::vector<double> p(c);
  switch (distribution) {
    case AttrDistribution::Uniform:
      std::fill(p.begin(), p.end(), 1.0 / c);
      break;
    case AttrDistribution::Exponential: {
      if (lambda <= 0.0) throw InvalidArgument("AttributeSpec: lambda must be > 0");
      double z = 0.0;
      for (uint32_t j = 0; j < c; ++j) {
        p[j] = std::exp(-lambda * j);
        z += p[j];
      }
      for (auto& v : p) v /= z;
      break;
    }
    case AttrDistribution::PowerLaw: {
      if (alpha <= 0.0) throw InvalidArgument("AttributeSpec: alpha must be > 0");
      double z = 0.0;
      for (uint32_t j = 0; j < c; ++j) {
        p[j] = std::pow(static_cast<double>(j + 1), -alpha);
        z += p[j];
      }
      for (auto& v : p) v /= z;
      break;
    }
  }
  return p;
}

namespace {

// Per-position CDF for inversion sampling.
std::vector<std::vector<double>> build_cdfs(const AttributeSpec& spec) {
  auto cards = spec.effective_cardinalities();
  std::vector<std::vector<double>> cdfs(spec.l);
  for (uint32_t p = 0; p < spec.l; ++p) {
    auto probs = spec.value_probabilities(cards[p]);
    cdfs[p].resize(probs.size());
    double acc = 0.0;
    for (size_t j = 0; j < probs.size(); ++j) {
      acc += probs[j];
      cdfs[p][j] = acc;
    }
    cdfs[p].back() = 1.0;  // close the interval against rounding
  }
  return cdfs;
}

uint32_t draw_from_cdf(const std::vector<double>& cdf, double u) {
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<uint32_t>(it - cdf.begin());
}

}  // namespace

AttributeTable gen_attributes(uint32_t n, const AttributeSpec& spec) {
  if (spec.l == 0) throw InvalidArgument("gen_attributes: L must be >= 1");
  auto cdfs = build_cdfs(spec);
  AttributeTable table(n, spec.l);
  Rng rng(spec.seed);
  for (uint32_t i = 0; i < n; ++i) {
    uint32_t* row = table.row(i);
    for (uint32_t p = 0; p < spec.l; ++p)
      row[p] = draw_from_cdf(cdfs[p], rng.next_double());
  }
  return table;
}

QueryWorkload gen_workload(EmbeddingMatrix queries, const AttributeSpec& spec,
                           double absence_fraction, uint64_t seed) {
  if (absence_fraction < 0.0 || absence_fraction > 1.0)
    throw InvalidArgument("gen_workload: absence_fraction must be in [0, 1]");
  auto cdfs = build_cdfs(spec);
  QueryWorkload workload;
  workload.absence_fraction = absence_fraction;
  workload.filters.reserve(queries.size());
  Rng rng(seed);
  for (size_t i = 0; i < queries.size(); ++i) {
    std::vector<uint32_t> pattern(spec.l);
    for (uint32_t p = 0; p < spec.l; ++p) {
      if (rng.next_double() < absence_fraction)
        pattern[p] = kWildcard;
      else
        pattern[p] = draw_from_cdf(cdfs[p], rng.next_double());
    }
    workload.filters.emplace_back(std::move(pattern));
  }
  workload.queries = std::move(queries);
  return workload;
}

VecElementKind vec_kind_from_extension(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".fvecs") return VecElementKind::Float32;
  if (ext == ".bvecs") return VecElementKind::Uint8;
  if (ext == ".ivecs") return VecElementKind::Int32;
  throw InvalidArgument("cannot infer vector element kind from path: " + path);
}

namespace {

size_t element_bytes(VecElementKind kind) {
  return kind == VecElementKind::Uint8 ? 1 : 4;
}

}  // namespace

EmbeddingMatrix load_vecs(const std::string& path, VecElementKind kind) {
  BinaryReader rd(path);
  std::vector<float> values;
  size_t d = 0;
  size_t n = 0;
  const size_t esize = element_bytes(kind);
  while (rd.remaining() > 0) {
    if (rd.remaining() < 4)
      throw IoError("truncated record header in " + path);
    int32_t dim = rd.read_value<int32_t>();
    if (dim <= 0) throw IoError("non-positive record dimension in " + path);
    if (n == 0) {
      d = static_cast<size_t>(dim);
    } else if (static_cast<size_t>(dim) != d) {
      throw IoError("inconsistent dimension in " + path + ": record " +
                    std::to_string(n) + " has d=" + std::to_string(dim) +
                    ", expected " + std::to_string(d));
    }
    if (rd.remaining() < d * esize)
      throw IoError("truncated record body in " + path);
    switch (kind) {
      case VecElementKind::Float32: {
        auto rec = rd.read_array<float>(d);
        values.insert(values.end(), rec.begin(), rec.end());
        break;
      }
      case VecElementKind::Uint8: {
        auto rec = rd.read_array<uint8_t>(d);
        for (uint8_t v : rec) values.push_back(static_cast<float>(v));
        break;
      }
      case VecElementKind::Int32: {
        auto rec = rd.read_array<int32_t>(d);
        for (int32_t v : rec) values.push_back(static_cast<float>(v));
        break;
      }
    }
    ++n;
  }
  if (n == 0) throw IoError("empty vector file: " + path);
  return EmbeddingMatrix(n, d, std::move(values));
}

void save_vecs(const std::string& path, const EmbeddingMatrix& matrix,
               VecElementKind kind) {
  BinaryWriter w(path);
  const int32_t dim = static_cast<int32_t>(matrix.dim());
  for (size_t i = 0; i < matrix.size(); ++i) {
    w.write_value(dim);
    const float* row = matrix.row(i);
    switch (kind) {
      case VecElementKind::Float32:
        w.write_bytes(row, matrix.dim() * sizeof(float));
        break;
      case VecElementKind::Uint8:
        for (size_t j = 0; j < matrix.dim(); ++j)
          w.write_value(static_cast<uint8_t>(row[j]));
        break;
      case VecElementKind::Int32:
        for (size_t j = 0; j < matrix.dim(); ++j)
          w.write_value(static_cast<int32_t>(row[j]));
        break;
    }
  }
}

void save_attribute_table(const std::string& path, const AttributeTable& attrs) {
  BinaryWriter w(path);
  w.write_value(static_cast<uint32_t>(attrs.size()));
  w.write_value(static_cast<uint32_t>(attrs.attr_count()));
  w.write_bytes(attrs.data(), attrs.size() * attrs.attr_count() * sizeof(uint32_t));
}

AttributeTable load_attribute_table(const std::string& path, bool allow_wildcard) {
  BinaryReader rd(path);
  uint32_t n = rd.read_value<uint32_t>();
  uint32_t l = rd.read_value<uint32_t>();
  if (l == 0) throw IoError("attribute file with l=0: " + path);
  if (rd.remaining() != static_cast<uint64_t>(n) * l * sizeof(uint32_t))
    throw IoError("truncated or oversized attribute file: " + path);
  auto codes = rd.read_array<uint32_t>(static_cast<size_t>(n) * l);
  AttributeTable table(n, l, std::move(codes));
  if (!allow_wildcard) table.validate_no_wildcard();
  return table;
}

void save_attribute_table_csv(const std::string& path,
                              const AttributeTable& attrs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  for (size_t i = 0; i < attrs.size(); ++i) {
    const uint32_t* row = attrs.row(i);
    for (size_t p = 0; p < attrs.attr_count(); ++p) {
      if (p) out << ',';
      if (row[p] == kWildcard)
        out << '*';
      else
        out << row[p];
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

AttributeTable load_attribute_table_csv(const std::string& path,
                                        bool allow_wildcard) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for read: " + path);
  std::vector<uint32_t> codes;
  size_t l = 0;
  size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    size_t cells = 0;
    while (std::getline(ss, cell, ',')) {
      if (cell == "*") {
        if (!allow_wildcard)
          throw DataError("wildcard in attribute CSV data row: " + path);
        codes.push_back(kWildcard);
      } else {
        codes.push_back(static_cast<uint32_t>(std::stoul(cell)));
      }
      ++cells;
    }
    if (n == 0)
      l = cells;
    else if (cells != l)
      throw IoError("ragged attribute CSV at line " + std::to_string(n + 1) +
                    ": " + path);
    ++n;
  }
  if (n == 0) throw IoError("empty attribute CSV: " + path);
  return AttributeTable(n, l, std::move(codes));
}

EmbeddingMatrix gen_gaussian_mixture(uint32_t n, uint32_t d, uint32_t clusters,
                                     double center_scale, uint64_t seed) {
  if (clusters == 0) throw InvalidArgument("gen_gaussian_mixture: clusters >= 1");
  Rng rng(seed);
  std::vector<float> centers(static_cast<size_t>(clusters) * d);
  for (auto& v : centers)
    v = static_cast<float>(rng.next_gaussian() * center_scale);
  EmbeddingMatrix matrix(n, d);
  for (uint32_t i = 0; i < n; ++i) {
    uint32_t c = static_cast<uint32_t>(rng.next_u64() % clusters);
    const float* center = centers.data() + static_cast<size_t>(c) * d;
    float* row = matrix.row(i);
    for (uint32_t j = 0; j < d; ++j)
      row[j] = center[j] + static_cast<float>(rng.next_gaussian());
  }
  return matrix;
}

}  // namespace caps
