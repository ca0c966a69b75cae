#include "egw/eigensolver.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace egw {

void fix_signs(Eigen::MatrixXd& vectors) {
  for (Index k = 0; k < vectors.cols(); ++k) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < vectors.rows(); ++i) {
      // ties resolved towards the first index so the rule is deterministic
      if (std::abs(vectors(i, k)) > best + 1e-12) {
        best = std::abs(vectors(i, k));
        arg = i;
      }
    }
    if (vectors(arg, k) < 0.0) vectors.col(k) *= -1.0;
  }
}

namespace {

SymmetricEigen dense_top(const Matrix& k, Index count) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(k), Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw SolverError("symmetric eigendecomposition failed");
  const Index n = k.rows();
  SymmetricEigen out;
  out.values.resize(count);
  out.vectors.resize(n, count);
  for (Index c = 0; c < count; ++c) {
    out.values[c] = es.eigenvalues()[n - 1 - c];
    out.vectors.col(c) = es.eigenvectors().col(n - 1 - c);
  }
  return out;
}

// Orthogonal iteration on K + shift I, with shift making the operator PSD so the
// dominant subspace corresponds to the largest (not largest-magnitude) eigenvalues.
SymmetricEigen subspace_top(const Matrix& k, Index count, double tol, int max_sweeps) {
  const Index n = k.rows();
  const Index block = std::min<Index>(n, count + std::min<Index>(count, 10) + 2);
  double gersh = 0.0;
  for (Index i = 0; i < n; ++i) gersh = std::max(gersh, k.row(i).cwiseAbs().sum());
  const double shift = gersh;

  Eigen::MatrixXd q(n, block);
  // deterministic start: a fixed pseudo-random pattern
  uint64_t state = 0x9E3779B97F4A7C15ull;
  for (Index j = 0; j < block; ++j) {
    for (Index i = 0; i < n; ++i) {
      state ^= state << 13;
      state ^= state >> 7;
      state ^= state << 17;
      q(i, j) = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
  q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);

  SymmetricEigen out;
  Eigen::MatrixXd kq(n, block);
  Vector values(block);
  Eigen::MatrixXd ritz;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    kq.noalias() = k * q;
    // Rayleigh-Ritz on the current subspace
    Eigen::MatrixXd h = q.transpose() * kq;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    values = es.eigenvalues().reverse();
    ritz = q * es.eigenvectors().rowwise().reverse();
    const Eigen::MatrixXd kr = kq * es.eigenvectors().rowwise().reverse();
    double resid = 0.0;
    for (Index c = 0; c < count; ++c) {
      resid = std::max(resid, (kr.col(c) - values[c] * ritz.col(c)).norm());
    }
    out.sweeps = sweep;
    if (resid <= tol * std::max(1.0, std::abs(values[0]))) break;
    Eigen::MatrixXd next = kq + shift * q;
    Eigen::HouseholderQR<Eigen::MatrixXd> step(next);
    q = step.householderQ() * Eigen::MatrixXd::Identity(n, block);
  }
  out.values = values.head(count);
  out.vectors = ritz.leftCols(count);
  return out;
}

}  // namespace

SymmetricEigen top_eigenpairs(const Matrix& k, Index count, Index dense_limit, double tol,
                              int max_sweeps) {
  if (k.rows() != k.cols()) throw InputError("eigensolver needs a square matrix");
  if (count < 1 || count > k.rows()) throw InputError("requested eigenpair count out of range");
  SymmetricEigen out =
      k.rows() <= dense_limit ? dense_top(k, count) : subspace_top(k, count, tol, max_sweeps);
  fix_signs(out.vectors);
  return out;
}

double min_eigenvalue(const Matrix& k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(k), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverError("symmetric eigendecomposition failed");
  return es.eigenvalues()[0];
}

}  // namespace egw
