#pragma once

#include <memory>

#include "egw/cost_provider.hpp"
#include "egw/types.hpp"

namespace egw {

/// Weighted point cloud alpha = sum_i a_i delta_{x_i}. Row i of `points` is x_i.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  /// Uniform weights.
  explicit DiscreteMeasure(Matrix points);
  DiscreteMeasure(Matrix points, Vector weights);

  Index size() const noexcept { return points_.rows(); }
  Index dim() const noexcept { return points_.cols(); }
  const Matrix& points() const noexcept { return points_; }
  const Vector& weights() const noexcept { return weights_; }

  /// Weighted mean of the points.
  Eigen::RowVectorXd centroid() const;

 private:
  Matrix points_;
  Vector weights_;
};

/// Checks the weight invariants (finite, > 1e-12, sum to 1 within 1e-9).
void validate_weights(const Vector& weights);

Vector uniform_weights(Index n);

/// Divides the points by their largest distance to the weighted centroid.
DiscreteMeasure normalize_radius(const DiscreteMeasure& alpha);

/// Explicit N x M transport plan.
struct DenseCoupling {
  Matrix pi;

  DenseCoupling() = default;
  /// Checks non-negativity and that the total mass is 1 within `mass_tol`.
  explicit DenseCoupling(Matrix pi, double mass_tol = 1e-6);

  Index rows() const noexcept { return pi.rows(); }
  Index cols() const noexcept { return pi.cols(); }
  static DenseCoupling product(const Vector& a, const Vector& b);
};

/// Coupling held through its Sinkhorn potentials:
///   pi_ij = a_i b_j exp((f_i + g_j - c_ij) / eps_eff).
struct ImplicitCoupling {
  Vector f;
  Vector g;
  double eps_eff = 1.0;
  std::shared_ptr<const CostProvider> cost;
  Vector a;
  Vector b;

  Index rows() const noexcept { return f.size(); }
  Index cols() const noexcept { return g.size(); }

  /// Writes row i of pi into out (length cols()); `cost_row` scratch of the same length.
  void row(Index i, double* out, double* cost_row) const;
  /// Row and column sums of the reconstructed plan.
  void marginals(Vector& rows_out, Vector& cols_out) const;
};

/// Densifies in the log domain; throws SolverError naming (i, j) on a non-finite entry.
DenseCoupling densify(const ImplicitCoupling& coupling);

double marginal_error(const Matrix& pi, const Vector& a, const Vector& b);
double marginal_error(const DenseCoupling& pi, const DiscreteMeasure& alpha,
                      const DiscreteMeasure& beta);
double marginal_error(const ImplicitCoupling& pi, const Vector& a, const Vector& b);
double marginal_error(const ImplicitCoupling& pi, const DiscreteMeasure& alpha,
                      const DiscreteMeasure& beta);

/// KL(pi | a x b) with 0 log 0 = 0.
double kl_divergence(const Matrix& pi, const Vector& a, const Vector& b);
double kl_divergence(const DenseCoupling& pi, const DiscreteMeasure& alpha,
                     const DiscreteMeasure& beta);

}  // namespace egw
