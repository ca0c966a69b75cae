#pragma once

#include <string>

#include "egw/types.hpp"

namespace egw {

enum class CostKind { SqEuclidean, Euclidean, PNorm, ExpKernel, Embedding, DenseMatrix };

/// Base cost on one side of a GW problem.
///   sq_euclidean   ||x - x'||^2
///   euclidean      ||x - x'||
///   p_norm         ||x - x'||^p, 0 < p <= 2
///   exp_kernel     1 - exp(-||x - x'||^2 / (2 sigma^2))
///   embedding      the points are precomputed coordinates, c = ||x - x'||^2
///   dense_matrix   user-supplied N x N matrix
struct CostSpec {
  CostKind kind = CostKind::SqEuclidean;
  double p = 2.0;
  double sigma = 1.0;
  std::string path;  // embedding / matrix file

  static CostSpec sq_euclidean() { return {}; }
  static CostSpec euclidean() { return {CostKind::Euclidean, 1.0, 1.0, {}}; }
  static CostSpec p_norm(double p) { return {CostKind::PNorm, p, 1.0, {}}; }
  static CostSpec exp_kernel(double sigma) { return {CostKind::ExpKernel, 2.0, sigma, {}}; }

  /// Parses "sq_euclidean", "euclidean", "p_norm:<p>", "exp:<sigma>",
  /// "embedding:<path>" or "matrix:<path>".
  static CostSpec parse(const std::string& text);
  void validate() const;
  std::string to_string() const;

  /// True when c is the squared Euclidean distance of the given coordinates.
  bool is_squared_distance() const {
    return kind == CostKind::SqEuclidean || kind == CostKind::Embedding;
  }
  /// Exponent of ||x - x'|| for the power-law kinds.
  double exponent() const;
  /// Whether gradients with respect to point positions are available.
  bool differentiable() const;
};

/// c(r) as a function of the Euclidean distance r >= 0.
double cost_of_distance(const CostSpec& spec, double r);

/// Pairwise cost matrix between the rows of `x` and `y` (same ambient dimension).
Matrix cost_matrix(const Matrix& x, const Matrix& y, const CostSpec& spec);
Matrix cost_matrix(const Matrix& x, const CostSpec& spec);

/// grad_x c(x, y) for one pair of points, written into `out`.
void cost_gradient(const CostSpec& spec, const double* x, const double* y, Index dim,
                   double* out);

/// Checks that C is square, finite, symmetric and has a zero diagonal (tolerance 1e-9).
void validate_cost_matrix(const Matrix& c);

}  // namespace egw
