#include "caps/reference.hpp"

#include <algorithm>
#include <cmath>

namespace caps::ref {

double l2_sq_f64(const float* x, const float* y, size_t d) {
  double acc = 0.0;
  for (size_t i = 0; i < d; ++i) {
    double di = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    acc += di * di;
  }
  return acc;
}

double inner_product_f64(const float* x, const float* y, size_t d) {
  double acc = 0.0;
  for (size_t i = 0; i < d; ++i)
    acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return acc;
}

double distance_f64(const float* x, const float* y, size_t d, Metric metric) {
  switch (metric) {
    case Metric::SquaredEuclidean:
      return l2_sq_f64(x, y, d);
    case Metric::InnerProduct:
      return -inner_product_f64(x, y, d);
    case Metric::Cosine: {
      double nx = std::sqrt(inner_product_f64(x, x, d));
      double ny = std::sqrt(inner_product_f64(y, y, d));
      if (nx == 0.0 || ny == 0.0) return 0.0;
      return -inner_product_f64(x, y, d) / (nx * ny);
    }
  }
  throw InvalidArgument("distance_f64: unknown metric");
}

uint32_t nearest_centroid(const float* centroids, uint32_t b, size_t d,
                          const float* x, Metric metric) {
  uint32_t best = 0;
  double best_dist = distance_f64(x, centroids, d, metric);
  for (uint32_t c = 1; c < b; ++c) {
    double dist = distance_f64(x, centroids + static_cast<size_t>(c) * d, d, metric);
    if (dist < best_dist) {
      best_dist = dist;
      best = c;
    }
  }
  return best;
}

std::vector<uint32_t> assign_all_serial(const float* centroids, uint32_t b,
                                        const EmbeddingMatrix& vectors,
                                        Metric metric) {
  std::vector<uint32_t> out(vectors.size());
  for (size_t i = 0; i < vectors.size(); ++i)
    out[i] = nearest_centroid(centroids, b, vectors.dim(), vectors.row(i), metric);
  return out;
}

std::vector<ScoredId> exact_filtered_topk_twopass(const EmbeddingMatrix& vectors,
                                                  const AttributeTable& attrs,
                                                  const float* q,
                                                  const QueryFilter& f,
                                                  uint32_t k, Metric metric) {
  std::vector<uint32_t> survivors;
  for (size_t i = 0; i < attrs.size(); ++i) {
    if (filter_matches(attrs.row_span(i), f)) survivors.push_back(static_cast<uint32_t>(i));
  }
  std::vector<ScoredId> scored;
  scored.reserve(survivors.size());
  for (uint32_t id : survivors)
    scored.push_back({distance_f64(q, vectors.row(id), vectors.dim(), metric), id});
  std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.id < b.id;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

}  // namespace caps::ref
