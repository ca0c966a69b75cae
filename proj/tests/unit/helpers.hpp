#pragma once

#include <cmath>
#include <random>

#include "egw/embedding.hpp"
#include "egw/measures.hpp"
#include "egw/synthetic.hpp"

namespace egw::test {

using Rng = synthetic::Rng;

inline DiscreteMeasure cloud(Rng& rng, Index n, Index d, bool weighted = false) {
  Matrix p = synthetic::gaussian_cloud(rng, n, d);
  if (weighted) return normalize_radius(DiscreteMeasure(std::move(p), synthetic::random_weights(rng, n)));
  return normalize_radius(DiscreteMeasure(std::move(p)));
}

inline EmbeddedMeasure embed_sq(const DiscreteMeasure& m) {
  return embed_measure(m, CostSpec::sq_euclidean(), m.dim());
}

inline Matrix random_cost(Rng& rng, Index n, Index m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix c(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) c(i, j) = u(rng);
  }
  return c;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace egw::test
