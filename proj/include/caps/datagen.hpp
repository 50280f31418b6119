#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "caps/core.hpp"

namespace caps {

/// Deterministic helpers on top of mt19937_64: the distribution shaping is
/// hand-rolled so generated datasets are identical across standard
/// libraries, not just across runs.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller.
  double next_gaussian();

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

enum class AttrDistribution : uint32_t {
  Uniform = 0,
  Exponential = 1,  // P(v = j) proportional to exp(-lambda * j)
  PowerLaw = 2,     // P(v = j) proportional to (j + 1)^(-alpha)
};

struct AttributeSpec {
  uint32_t l = 3;
  std::vector<uint32_t> cardinalities;  // per position; default 12 each
  AttrDistribution distribution = AttrDistribution::Exponential;
  double lambda = 1.0;
  double alpha = 1.5;
  uint64_t seed = 0;

  std::vector<uint32_t> effective_cardinalities() const;
  /// Per-value probabilities for one position.
  std::vector<double> value_probabilities(uint32_t cardinality) const;
};

/// i.i.d. sample of n attribute rows per the spec; never emits wildcards.
AttributeTable gen_attributes(uint32_t n, const AttributeSpec& spec);

struct QueryWorkload {
  EmbeddingMatrix queries;
  std::vector<QueryFilter> filters;
  double absence_fraction = 0.0;
};

/// Per query and position: wildcard with probability absence_fraction, else
/// a value drawn from the data-attribute distribution.
QueryWorkload gen_workload(EmbeddingMatrix queries, const AttributeSpec& spec,
                           double absence_fraction, uint64_t seed);

enum class VecElementKind : uint32_t {
  Float32 = 0,
  Uint8 = 1,
  Int32 = 2,
};

/// Reads .fvecs / .bvecs / .ivecs: little-endian records of an int32
/// dimension followed by d elements. Enforces a constant dimension and
/// complete records.
EmbeddingMatrix load_vecs(const std::string& path, VecElementKind kind);

/// Writer for the same formats (float32 values are cast for u8/i32).
void save_vecs(const std::string& path, const EmbeddingMatrix& matrix,
               VecElementKind kind = VecElementKind::Float32);

VecElementKind vec_kind_from_extension(const std::string& path);

// Attribute tables on disk: headered binary (u32 n, u32 l, n*l u32 codes)
// or CSV with one row per point ("*" marks a wildcard in filter files).

void save_attribute_table(const std::string& path, const AttributeTable& attrs);
AttributeTable load_attribute_table(const std::string& path,
                                    bool allow_wildcard = false);

void save_attribute_table_csv(const std::string& path,
                              const AttributeTable& attrs);
AttributeTable load_attribute_table_csv(const std::string& path,
                                        bool allow_wildcard = false);

/// Isotropic Gaussian mixture: `clusters` centers scaled by center_scale,
/// unit within-cluster noise. The synthetic stand-in for clustered
/// embedding corpora.
EmbeddingMatrix gen_gaussian_mixture(uint32_t n, uint32_t d, uint32_t clusters,
                                     double center_scale, uint64_t seed);

}  // namespace caps
