#pragma once

#include <memory>
#include <optional>

#include "egw/cost.hpp"
#include "egw/measures.hpp"
#include "egw/types.hpp"

namespace egw {

/// Weighted double-centered kernel k(x, x') derived from a CNT cost.
struct CenteredKernel {
  Matrix k;
  Vector weights;
};

/// Data needed to map the feature of a point back to ambient coordinates
/// (kernel projection); kept for the position gradients of kernel costs.
struct KernelBasis {
  Matrix points;          // ambient coordinates the kernel was built from
  CostSpec spec;
  Vector weights;
  Vector values;          // retained eigenvalues (clamped, > 0 or 0)
  Eigen::MatrixXd vectors;  // N x D eigenvectors
};

/// Centered features X (N x D) with the augmented coordinate s_i = |X_i|^2 / 2.
class EmbeddedMeasure {
 public:
  EmbeddedMeasure() = default;
  /// Re-centers X under the weights; s is recomputed from the result.
  EmbeddedMeasure(Matrix features, Vector weights, double explained_variance = 1.0);

  Index size() const noexcept { return x_.rows(); }
  Index dim() const noexcept { return x_.cols(); }
  const Matrix& features() const noexcept { return x_; }
  const Vector& half_sq_norms() const noexcept { return s_; }
  const Vector& weights() const noexcept { return w_; }

  double explained_variance = 1.0;
  int clamped_eigenvalues = 0;
  /// Present when the features come from a kernel PCA of an ambient cost.
  std::shared_ptr<const KernelBasis> basis;

  /// Features with the s column appended: N x (D + 1).
  Matrix augmented() const;

 private:
  Matrix x_;
  Vector s_;
  Vector w_;
};

/// Raw kernel from base index `base`, then (I - 1 a^T) K (I - a 1^T), symmetrized.
CenteredKernel kernel_from_cost(const Matrix& c, const Vector& weights, Index base = 0);

/// Truncated kernel PCA: X_i = V_{i,1:D} sqrt(Lambda_{1:D}).
EmbeddedMeasure kernel_pca(const CenteredKernel& k, Index d);

/// Cost evaluation + centering + kernel PCA, with an exact shortcut for squared
/// Euclidean costs. Dense-matrix costs go through `embed_cost_matrix`.
EmbeddedMeasure embed_measure(const DiscreteMeasure& alpha, const CostSpec& spec, Index d);
EmbeddedMeasure embed_cost_matrix(const Matrix& c, const Vector& weights, Index d);

struct CntReport {
  double min_eigenvalue = 0.0;
  double max_abs_eigenvalue = 0.0;
  bool is_cnt = true;
};

CntReport cnt_diagnostic(const Matrix& c, const Vector& weights);

/// Eigenvalues of Sigma = sum_i a_i X_i X_i^T, descending and clamped at 0.
Vector covariance_spectrum(const EmbeddedMeasure& emb);

/// True when eps log(1/eps) exceeds lambda_min^2, i.e. the temperature is too
/// large to separate the measure from a blurred copy of itself.
bool separability_warning(const EmbeddedMeasure& emb, double eps);

/// sum_ij a_i a_j (|X_i - X_j|^2 - c_ij)^2.
double embedding_distortion(const EmbeddedMeasure& emb, const Matrix& c);

}  // namespace egw
