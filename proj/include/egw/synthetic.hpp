#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "egw/measures.hpp"

namespace egw::synthetic {

using Rng = std::mt19937_64;

/// Standard normal entries, n x d.
Matrix gaussian_cloud(Rng& rng, Index n, Index d);
/// Positive weights drawn uniformly in [0.5, 1.5] and normalized.
Vector random_weights(Rng& rng, Index n);
/// Haar-distributed rotation (determinant +1).
Matrix random_rotation(Rng& rng, Index d);
std::vector<Index> random_permutation(Rng& rng, Index n);
/// Uniform samples of the unit sphere S^{d-1} in R^d.
Matrix sphere(Rng& rng, Index n, Index d);
/// Uniform samples of the unit ball with pairwise distances >= min_dist
/// (dart throwing; throws InputError when the points do not fit).
Matrix separated_ball(Rng& rng, Index n, Index d, double min_dist);
/// Noisy 2D shape invariant under x -> -x: points come in mirrored pairs.
Matrix mirror_shape(Rng& rng, Index n_half);

/// Row i of the result is row perm[i] of `points` mapped by `rotation`.
Matrix rotate_permute(const Matrix& points, const Matrix& rotation, const std::vector<Index>& perm);

}  // namespace egw::synthetic
