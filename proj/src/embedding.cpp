#include "egw/embedding.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "egw/eigensolver.hpp"

namespace egw {

namespace {

constexpr Index kDenseLimit = 4096;

Matrix center_rows(const Matrix& x, const Vector& w) {
  const Eigen::RowVectorXd mean = w.transpose() * x;
  return x.rowwise() - mean;
}

}  // namespace

EmbeddedMeasure::EmbeddedMeasure(Matrix features, Vector weights, double explained)
    : explained_variance(explained), w_(std::move(weights)) {
  if (w_.size() != features.rows()) throw InputError("features and weights differ in length");
  validate_weights(w_);
  if (!features.allFinite()) throw InputError("features must be finite");
  x_ = center_rows(features, w_);
  s_ = 0.5 * x_.rowwise().squaredNorm();
}

Matrix EmbeddedMeasure::augmented() const {
  Matrix out(x_.rows(), x_.cols() + 1);
  out.leftCols(x_.cols()) = x_;
  out.col(x_.cols()) = s_;
  return out;
}

CenteredKernel kernel_from_cost(const Matrix& c, const Vector& weights, Index base) {
  validate_cost_matrix(c);
  if (weights.size() != c.rows()) throw InputError("cost matrix and weights differ in size");
  if (base < 0 || base >= c.rows()) throw InputError("base index out of range");
  const Index n = c.rows();
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) k(i, j) = 0.5 * (c(i, base) + c(base, j) - c(i, j));
  }
  const Vector r = k * weights;
  const double mean = weights.dot(r);
  Matrix centered(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) centered(i, j) = k(i, j) - r[i] - r[j] + mean;
  }
  CenteredKernel out;
  out.k = 0.5 * (centered + centered.transpose());
  out.weights = weights;
  return out;
}

namespace {

EmbeddedMeasure kernel_pca_impl(const CenteredKernel& kernel, Index d, KernelBasis* basis) {
  const Matrix& k = kernel.k;
  const Index n = k.rows();
  if (d < 1) throw InputError("embedding dimension must be at least 1");
  if (d > n) {
    throw InputError("embedding dimension " + std::to_string(d) + " exceeds the number of points " +
                     std::to_string(n));
  }
  SymmetricEigen eig;
  double total = 0.0;
  double lowest = 0.0;
  if (n <= kDenseLimit) {
    eig = top_eigenpairs(k, n, kDenseLimit);
    for (Index i = 0; i < n; ++i) total += std::max(eig.values[i], 0.0);
    lowest = eig.values[n - 1];
  } else {
    eig = top_eigenpairs(k, d, kDenseLimit);
    total = std::max(k.trace(), 0.0);
    lowest = eig.values[d - 1];
  }
  const double scale = std::max(std::abs(eig.values[0]), std::abs(lowest));
  const double tol = 1e-12 * scale;
  if (eig.values[0] <= tol && lowest < -tol) {
    throw InputError("kernel has no positive eigenvalue: cost is not of negative type on this sample");
  }

  Vector kept(d);
  int clamped = 0;
  double captured = 0.0;
  for (Index c = 0; c < d; ++c) {
    double v = eig.values[c];
    if (v < 0.0) {
      ++clamped;
      v = 0.0;
    }
    kept[c] = v;
    captured += v;
  }
  Matrix x(n, d);
  for (Index c = 0; c < d; ++c) x.col(c) = eig.vectors.col(c) * std::sqrt(kept[c]);

  if (basis) {
    basis->values = kept;
    basis->vectors = eig.vectors.leftCols(d);
  }
  EmbeddedMeasure out(std::move(x), kernel.weights, total > 0.0 ? captured / total : 1.0);
  out.clamped_eigenvalues = clamped;
  return out;
}

}  // namespace

EmbeddedMeasure kernel_pca(const CenteredKernel& kernel, Index d) {
  return kernel_pca_impl(kernel, d, nullptr);
}

EmbeddedMeasure embed_measure(const DiscreteMeasure& alpha, const CostSpec& spec, Index d) {
  spec.validate();
  if (d < 1) throw InputError("embedding dimension must be at least 1");
  if (spec.kind == CostKind::DenseMatrix) {
    throw InputError("dense cost matrices are embedded with embed_cost_matrix");
  }
  const Vector& w = alpha.weights();
  if (spec.is_squared_distance()) {
    Matrix centered = center_rows(alpha.points(), w);
    if (d >= alpha.dim()) return EmbeddedMeasure(std::move(centered), w);
    // fewer features than coordinates: principal axes of the weighted covariance
    const Eigen::MatrixXd cov = centered.transpose() * w.asDiagonal() * centered;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Index dim = alpha.dim();
    Eigen::MatrixXd axes(dim, d);
    double captured = 0.0;
    double total = 0.0;
    for (Index c = 0; c < dim; ++c) total += std::max(es.eigenvalues()[c], 0.0);
    for (Index c = 0; c < d; ++c) {
      axes.col(c) = es.eigenvectors().col(dim - 1 - c);
      captured += std::max(es.eigenvalues()[dim - 1 - c], 0.0);
    }
    Eigen::MatrixXd proj = centered * axes;
    fix_signs(proj);
    return EmbeddedMeasure(Matrix(proj), w, total > 0.0 ? captured / total : 1.0);
  }

  const Matrix c = cost_matrix(alpha.points(), spec);
  auto basis = std::make_shared<KernelBasis>();
  basis->points = alpha.points();
  basis->spec = spec;
  basis->weights = w;
  EmbeddedMeasure emb = kernel_pca_impl(kernel_from_cost(c, w), d, basis.get());
  emb.basis = std::move(basis);
  return emb;
}

EmbeddedMeasure embed_cost_matrix(const Matrix& c, const Vector& weights, Index d) {
  return kernel_pca(kernel_from_cost(c, weights), d);
}

CntReport cnt_diagnostic(const Matrix& c, const Vector& weights) {
  const CenteredKernel k = kernel_from_cost(c, weights);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(k.k), Eigen::EigenvaluesOnly);
  const Vector& ev = es.eigenvalues();
  CntReport r;
  r.min_eigenvalue = ev[0];
  r.max_abs_eigenvalue = std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
  r.is_cnt = r.min_eigenvalue >= -1e-6 * r.max_abs_eigenvalue;
  return r;
}

Vector covariance_spectrum(const EmbeddedMeasure& emb) {
  const Matrix& x = emb.features();
  const Eigen::MatrixXd cov = x.transpose() * emb.weights().asDiagonal() * x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse().cwiseMax(0.0);
}

bool separability_warning(const EmbeddedMeasure& emb, double eps) {
  const Vector spec = covariance_spectrum(emb);
  const double lmin = spec[spec.size() - 1];
  return eps * std::log(1.0 / eps) > lmin * lmin;
}

double embedding_distortion(const EmbeddedMeasure& emb, const Matrix& c) {
  const Matrix& x = emb.features();
  const Vector& w = emb.weights();
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.rows(); ++j) {
      const double diff = (x.row(i) - x.row(j)).squaredNorm() - c(i, j);
      total += w[i] * w[j] * diff * diff;
    }
  }
  return total;
}

}  // namespace egw
