#include "egw/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/QR>

namespace egw::synthetic {

Matrix gaussian_cloud(Rng& rng, Index n, Index d) {
  std::normal_distribution<double> normal;
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) x(i, k) = normal(rng);
  }
  return x;
}

Vector random_weights(Rng& rng, Index n) {
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Vector w(n);
  for (Index i = 0; i < n; ++i) w(i) = unif(rng);
  return w / w.sum();
}

Matrix random_rotation(Rng& rng, Index d) {
  const Eigen::MatrixXd g = gaussian_cloud(rng, d, d);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 0; k < d; ++k) {
    if (r(k, k) < 0.0) q.col(k) *= -1.0;
  }
  if (q.determinant() < 0.0) q.col(0) *= -1.0;
  return q;
}

std::vector<Index> random_permutation(Rng& rng, Index n) {
  std::vector<Index> p(n);
  std::iota(p.begin(), p.end(), Index{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

Matrix sphere(Rng& rng, Index n, Index d) {
  Matrix x = gaussian_cloud(rng, n, d);
  x.rowwise().normalize();
  return x;
}

Matrix separated_ball(Rng& rng, Index n, Index d, double min_dist) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Matrix x(n, d);
  Eigen::RowVectorXd p(d);
  Index placed = 0;
  for (long attempt = 0; placed < n; ++attempt) {
    if (attempt > 1000 * n) throw InputError("cannot place the points at the requested separation");
    for (Index k = 0; k < d; ++k) p[k] = unif(rng);
    if (p.squaredNorm() > 1.0) continue;
    bool ok = true;
    for (Index i = 0; i < placed && ok; ++i) ok = (x.row(i) - p).norm() >= min_dist;
    if (ok) x.row(placed++) = p;
  }
  return x;
}

Matrix mirror_shape(Rng& rng, Index n_half) {
  // an elongated, bent blob on the right half-plane, mirrored to the left
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 0.05);
  Matrix x(2 * n_half, 2);
  for (Index i = 0; i < n_half; ++i) {
    const double t = unif(rng);
    const double px = 0.2 + t + normal(rng);
    const double py = 0.6 * t * t - 0.3 * t + normal(rng);
    x(2 * i, 0) = px;
    x(2 * i, 1) = py;
    x(2 * i + 1, 0) = -px;
    x(2 * i + 1, 1) = py;
  }
  return x;
}

Matrix rotate_permute(const Matrix& points, const Matrix& rotation, const std::vector<Index>& perm) {
  Matrix out(points.rows(), points.cols());
  for (Index i = 0; i < points.rows(); ++i) {
    out.row(i) = points.row(perm[i]) * rotation.transpose();
  }
  return out;
}

}  // namespace egw::synthetic
