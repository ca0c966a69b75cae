#include "egw/kmeans.hpp"

#include <limits>
#include <random>

namespace egw {

namespace {

double sq_dist(const Matrix& a, Index i, const Matrix& b, Index j) {
  double s = 0.0;
  for (Index k = 0; k < a.cols(); ++k) {
    const double d = a(i, k) - b(j, k);
    s += d * d;
  }
  return s;
}

}  // namespace

KMeansResult weighted_kmeans(const Matrix& points, const Vector& weights, Index k,
                             std::uint64_t seed, int max_sweeps) {
  const Index n = points.rows();
  if (k < 1 || k > n) throw InputError("k-means cluster count out of range");
  std::mt19937_64 rng(seed);

  // k-means++ with probabilities proportional to weight * squared distance
  Matrix centers(k, points.cols());
  {
    std::discrete_distribution<Index> first(weights.data(), weights.data() + n);
    centers.row(0) = points.row(first(rng));
    Vector best(n);
    for (Index i = 0; i < n; ++i) best[i] = sq_dist(points, i, centers, 0);
    for (Index c = 1; c < k; ++c) {
      Vector score = best.cwiseProduct(weights);
      const double total = score.sum();
      Index pick = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng);
        pick = n - 1;
        for (Index i = 0; i < n; ++i) {
          r -= score[i];
          if (r < 0.0 && score[i] > 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = c % n;  // all points coincide with chosen centers
      }
      centers.row(c) = points.row(pick);
      for (Index i = 0; i < n; ++i) best[i] = std::min(best[i], sq_dist(points, i, centers, c));
    }
  }

  std::vector<Index> labels(n, -1);
  Vector dist(n);
  KMeansResult res;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    bool changed = false;
#pragma omp parallel for schedule(static) reduction(|| : changed)
    for (Index i = 0; i < n; ++i) {
      Index arg = 0;
      double d = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < k; ++c) {
        const double dc = sq_dist(points, i, centers, c);
        if (dc < d) {
          d = dc;
          arg = c;
        }
      }
      dist[i] = d;
      if (labels[i] != arg) {
        labels[i] = arg;
        changed = true;
      }
    }
    res.sweeps = sweep;

    Matrix sums = Matrix::Zero(k, points.cols());
    Vector mass = Vector::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += weights[i] * points.row(i);
      mass[labels[i]] += weights[i];
    }
    bool reseeded = false;
    for (Index c = 0; c < k; ++c) {
      if (mass[c] > 0.0) {
        centers.row(c) = sums.row(c) / mass[c];
        continue;
      }
      Index far = 0;
      for (Index i = 1; i < n; ++i) {
        if (dist[i] > dist[far]) far = i;
      }
      centers.row(c) = points.row(far);
      dist[far] = 0.0;
      labels[far] = c;
      reseeded = true;
    }
    if (!changed && !reseeded) break;
  }

  // final aggregation from the last assignment
  res.centroids = Matrix::Zero(k, points.cols());
  res.weights = Vector::Zero(k);
  for (Index i = 0; i < n; ++i) {
    res.centroids.row(labels[i]) += weights[i] * points.row(i);
    res.weights[labels[i]] += weights[i];
  }
  // drop clusters left empty by a re-seed on the last sweep
  std::vector<Index> remap(k, -1);
  Index kept = 0;
  for (Index c = 0; c < k; ++c) {
    if (res.weights[c] <= 0.0) continue;
    res.centroids.row(kept) = res.centroids.row(c) / res.weights[c];
    res.weights[kept] = res.weights[c];
    remap[c] = kept++;
  }
  res.centroids.conservativeResize(kept, Eigen::NoChange);
  res.weights.conservativeResize(kept);
  for (auto& l : labels) l = remap[l];
  res.labels = std::move(labels);
  return res;
}

}  // namespace egw
