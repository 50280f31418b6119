#include "caps/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "caps/topk.hpp"

namespace caps {

namespace {

uint32_t nearest(const float* centroids, uint32_t b, size_t d, const float* x,
                 Metric metric) {
  uint32_t best = 0;
  float best_dist = distance(x, centroids, d, metric);
  for (uint32_t c = 1; c < b; ++c) {
    float dist = distance(x, centroids + static_cast<size_t>(c) * d, d, metric);
    if (dist < best_dist) {
      best_dist = dist;
      best = c;
    }
  }
  return best;
}

// Greedy-spread (farthest-point) seeding: first center from the seeded RNG,
// then repeatedly the point farthest from its nearest chosen center.
std::vector<float> greedy_spread_init(const EmbeddingMatrix& vectors, uint32_t b,
                                      Metric metric, uint64_t seed) {
  const size_t n = vectors.size();
  const size_t d = vectors.dim();
  std::vector<float> centroids;
  centroids.reserve(static_cast<size_t>(b) * d);

  std::mt19937_64 rng(seed);
  size_t first = static_cast<size_t>(rng() % n);
  centroids.insert(centroids.end(), vectors.row(first), vectors.row(first) + d);

  std::vector<float> min_dist(n);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < static_cast<int64_t>(n); ++i)
    min_dist[i] = distance(vectors.row(i), centroids.data(), d, metric);

  for (uint32_t c = 1; c < b; ++c) {
    size_t far = 0;
    float far_dist = min_dist[0];
    for (size_t i = 1; i < n; ++i) {
      if (min_dist[i] > far_dist) {
        far_dist = min_dist[i];
        far = i;
      }
    }
    const float* x = vectors.row(far);
    centroids.insert(centroids.end(), x, x + d);
    const float* added = centroids.data() + static_cast<size_t>(c) * d;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
      float dist = distance(vectors.row(i), added, d, metric);
      if (dist < min_dist[i]) min_dist[i] = dist;
    }
  }
  return centroids;
}

}  // namespace

uint32_t PartitionModel::assign(const float* x) const {
  return nearest(centroids_.data(), b_, d_, x, metric_);
}

uint32_t PartitionModel::assign(std::span<const float> x) const {
  if (x.size() != d_)
    throw InvalidArgument("PartitionModel::assign: dimension mismatch");
  return assign(x.data());
}

std::vector<uint32_t> PartitionModel::top_m(const float* q, uint32_t m) const {
  if (m == 0 || m > b_)
    throw InvalidArgument("top_m: m must be in [1, B]");
  BoundedTopK<float> sel(m);
  for (uint32_t c = 0; c < b_; ++c)
    sel.push(distance(q, centroid(c), d_, metric_), c);
  auto sorted = sel.take_sorted();
  std::vector<uint32_t> ids;
  ids.reserve(sorted.size());
  for (const auto& [dist, id] : sorted) ids.push_back(id);
  return ids;
}

PartitionModel train(const EmbeddingMatrix& vectors, uint32_t b,
                     const KMeansConfig& config,
                     std::vector<double>* objective_log) {
  const size_t n = vectors.size();
  const size_t d = vectors.dim();
  if (n == 0) throw InvalidArgument("train: empty dataset");
  if (b == 0 || b > n)
    throw InvalidArgument("train: b must be in [1, n], got b=" +
                          std::to_string(b) + " n=" + std::to_string(n));
  if (config.iters < 1) throw InvalidArgument("train: iters must be >= 1");
  vectors.validate_finite();

  const Metric metric = config.metric;
  std::vector<float> centroids = greedy_spread_init(vectors, b, metric, config.seed);

  std::vector<uint32_t> assignment(n);
  std::vector<std::vector<uint32_t>> members(b);

  for (uint32_t iter = 0; iter < config.iters; ++iter) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i)
      assignment[i] = nearest(centroids.data(), b, d, vectors.row(i), metric);

    for (auto& m : members) m.clear();
    for (size_t i = 0; i < n; ++i) members[assignment[i]].push_back(static_cast<uint32_t>(i));

    if (objective_log) {
      double obj = 0.0;
      for (size_t i = 0; i < n; ++i)
        obj += distance(vectors.row(i),
                        centroids.data() + static_cast<size_t>(assignment[i]) * d,
                        d, metric);
      objective_log->push_back(obj);
    }

    // Mean update, per-cluster in double so results do not depend on the
    // number of threads.
#pragma omp parallel for schedule(dynamic)
    for (int64_t c = 0; c < static_cast<int64_t>(b); ++c) {
      if (members[c].empty()) continue;
      std::vector<double> sum(d, 0.0);
      for (uint32_t id : members[c]) {
        const float* x = vectors.row(id);
        for (size_t j = 0; j < d; ++j) sum[j] += x[j];
      }
      float* cptr = centroids.data() + static_cast<size_t>(c) * d;
      double inv = 1.0 / static_cast<double>(members[c].size());
      for (size_t j = 0; j < d; ++j) cptr[j] = static_cast<float>(sum[j] * inv);
    }

    // Re-seed empty clusters from the largest cluster's farthest point.
    std::vector<char> claimed(n, 0);
    for (uint32_t c = 0; c < b; ++c) {
      if (!members[c].empty()) continue;
      uint32_t largest = 0;
      for (uint32_t c2 = 1; c2 < b; ++c2)
        if (members[c2].size() > members[largest].size()) largest = c2;
      const float* lc = centroids.data() + static_cast<size_t>(largest) * d;
      uint32_t far_id = kWildcard;
      float far_dist = 0.0f;
      for (uint32_t id : members[largest]) {
        if (claimed[id]) continue;
        float dist = distance(vectors.row(id), lc, d, metric);
        if (far_id == kWildcard || dist > far_dist) {
          far_dist = dist;
          far_id = id;
        }
      }
      if (far_id == kWildcard) continue;  // nothing left to steal
      claimed[far_id] = 1;
      const float* x = vectors.row(far_id);
      std::copy(x, x + d, centroids.data() + static_cast<size_t>(c) * d);
    }
  }

  std::optional<uint32_t> cap;
  if (config.balanced) {
    cap = config.balance_cap
              ? *config.balance_cap
              : static_cast<uint32_t>(
                    std::ceil(1.25 * static_cast<double>(n) / b));
  }
  return PartitionModel(b, static_cast<uint32_t>(d), metric,
                        std::move(centroids), cap);
}

std::vector<uint32_t> assign_all(const PartitionModel& model,
                                 const EmbeddingMatrix& vectors) {
  const size_t n = vectors.size();
  const size_t d = vectors.dim();
  if (d != model.dim())
    throw InvalidArgument("assign_all: dimension mismatch");
  const uint32_t b = model.partition_count();

  std::vector<uint32_t> nearest_id(n);
  std::vector<float> nearest_dist(n);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
    uint32_t c = model.assign(vectors.row(i));
    nearest_id[i] = c;
    nearest_dist[i] = distance(vectors.row(i), model.centroid(c), d, model.metric());
  }

  if (!model.balance_cap()) return nearest_id;

  const uint32_t cap = *model.balance_cap();
  // Greedy fill by ascending distance to the preferred centroid; points that
  // find their centroid full spill to the nearest centroid with room.
  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t bb) {
    return nearest_dist[a] < nearest_dist[bb];
  });

  std::vector<uint32_t> fill(b, 0);
  std::vector<uint32_t> out(n);
  for (uint32_t id : order) {
    uint32_t c = nearest_id[id];
    if (fill[c] >= cap) {
      float best_dist = 0.0f;
      uint32_t best = kWildcard;
      for (uint32_t c2 = 0; c2 < b; ++c2) {
        if (fill[c2] >= cap) continue;
        float dist = distance(vectors.row(id), model.centroid(c2), d, model.metric());
        if (best == kWildcard || dist < best_dist) {
          best_dist = dist;
          best = c2;
        }
      }
      if (best == kWildcard)
        throw InvalidArgument("assign_all: balance cap too small to hold all points");
      c = best;
    }
    out[id] = c;
    ++fill[c];
  }
  return out;
}

}  // namespace caps
