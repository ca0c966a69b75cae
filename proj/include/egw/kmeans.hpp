#pragma once

#include <cstdint>
#include <vector>

#include "egw/types.hpp"

namespace egw {

struct KMeansResult {
  Matrix centroids;            // k x dim, weighted means of the clusters
  Vector weights;              // aggregated point weights per cluster
  std::vector<Index> labels;   // cluster of each point
  int sweeps = 0;
};

/// Weighted k-means: k-means++ seeding from `seed`, at most `max_sweeps` Lloyd
/// sweeps; an empty cluster is re-seeded with the point farthest from its centroid.
KMeansResult weighted_kmeans(const Matrix& points, const Vector& weights, Index k,
                             std::uint64_t seed, int max_sweeps = 100);

}  // namespace egw
