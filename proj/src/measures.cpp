#include "egw/measures.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "egw/parallel/softmin.hpp"

namespace egw {

void validate_weights(const Vector& weights) {
  if (weights.size() == 0) throw InputError("measure has no points");
  double total = 0.0;
  for (Index i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    if (!std::isfinite(w)) throw InputError("non-finite weight at index " + std::to_string(i));
    if (w <= 1e-12) {
      throw InputError("weight at index " + std::to_string(i) + " is zero or negative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "weights sum to " << total << ", expected 1";
    throw InputError(os.str());
  }
}

Vector uniform_weights(Index n) { return Vector::Constant(n, 1.0 / static_cast<double>(n)); }

DiscreteMeasure::DiscreteMeasure(Matrix points)
    : DiscreteMeasure(std::move(points), Vector()) {}

DiscreteMeasure::DiscreteMeasure(Matrix points, Vector weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (weights_.size() == 0) weights_ = uniform_weights(points_.rows());
  if (weights_.size() != points_.rows()) {
    throw InputError("weights and points have different lengths");
  }
  validate_weights(weights_);
  if (!points_.allFinite()) throw InputError("point coordinates must be finite");
}

Eigen::RowVectorXd DiscreteMeasure::centroid() const { return weights_.transpose() * points_; }

DiscreteMeasure normalize_radius(const DiscreteMeasure& alpha) {
  const Eigen::RowVectorXd c = alpha.centroid();
  const double r = (alpha.points().rowwise() - c).rowwise().norm().maxCoeff();
  if (!(r > 0.0)) return alpha;
  return DiscreteMeasure(alpha.points() / r, alpha.weights());
}

DenseCoupling::DenseCoupling(Matrix p, double mass_tol) : pi(std::move(p)) {
  if ((pi.array() < 0.0).any()) throw InputError("coupling has negative entries");
  const double mass = pi.sum();
  if (std::abs(mass - 1.0) > mass_tol) {
    std::ostringstream os;
    os << "coupling mass " << mass << " differs from 1";
    throw InputError(os.str());
  }
}

DenseCoupling DenseCoupling::product(const Vector& a, const Vector& b) {
  return DenseCoupling(a * b.transpose());
}

void ImplicitCoupling::row(Index i, double* out, double* cost_row) const {
  const Index m = cols();
  cost->row(i, std::span<double>(cost_row, static_cast<size_t>(m)));
  const double base = std::log(a[i]) + f[i] / eps_eff;
  for (Index j = 0; j < m; ++j) {
    out[j] = std::exp(base + std::log(b[j]) + (g[j] - cost_row[j]) / eps_eff);
  }
}

namespace {

// Row blocks used for column reductions. The block layout only depends on the
// problem size, so the summation order is the same for any thread count.
Index column_block(Index n) { return std::max<Index>(64, (n + 63) / 64); }

}  // namespace

void ImplicitCoupling::marginals(Vector& rows_out, Vector& cols_out) const {
  const Index n = rows();
  const Index m = cols();
  const Index block = column_block(n);
  const Index nblocks = (n + block - 1) / block;
  Vector h(m);
  for (Index j = 0; j < m; ++j) h[j] = std::log(b[j]) + g[j] / eps_eff;
  rows_out.setZero(n);
  Matrix partial = Matrix::Zero(nblocks, m);
#pragma omp parallel
  {
    std::vector<double> c(m), p(m);
#pragma omp for schedule(static)
    for (Index blk = 0; blk < nblocks; ++blk) {
      for (Index i = blk * block; i < std::min(n, (blk + 1) * block); ++i) {
        cost->row(i, std::span<double>(c.data(), c.size()));
        serial::coupling_row(c.data(), h.data(), m, std::log(a[i]) + f[i] / eps_eff, eps_eff,
                             p.data());
        double s = 0.0;
        for (Index j = 0; j < m; ++j) {
          s += p[j];
          partial(blk, j) += p[j];
        }
        rows_out[i] = s;
      }
    }
  }
  cols_out.setZero(m);
  for (Index blk = 0; blk < nblocks; ++blk) cols_out += partial.row(blk).transpose();
}

DenseCoupling densify(const ImplicitCoupling& coupling) {
  const Index n = coupling.rows();
  const Index m = coupling.cols();
  Matrix pi(n, m);
  std::vector<double> scratch(m);
  for (Index i = 0; i < n; ++i) {
    coupling.row(i, pi.data() + i * m, scratch.data());
    for (Index j = 0; j < m; ++j) {
      if (!std::isfinite(pi(i, j))) {
        std::ostringstream os;
        os << "non-finite coupling entry at (" << i << ", " << j << ")";
        throw SolverError(os.str());
      }
    }
  }
  DenseCoupling out;
  out.pi = std::move(pi);
  return out;
}

double marginal_error(const Matrix& pi, const Vector& a, const Vector& b) {
  if (pi.rows() != a.size() || pi.cols() != b.size()) {
    throw InputError("coupling dimensions do not match the measures");
  }
  const Vector r = pi.rowwise().sum();
  const Vector c = pi.colwise().sum().transpose();
  return (r - a).lpNorm<1>() + (c - b).lpNorm<1>();
}

double marginal_error(const DenseCoupling& pi, const DiscreteMeasure& alpha,
                      const DiscreteMeasure& beta) {
  return marginal_error(pi.pi, alpha.weights(), beta.weights());
}

double marginal_error(const ImplicitCoupling& pi, const Vector& a, const Vector& b) {
  if (pi.rows() != a.size() || pi.cols() != b.size()) {
    throw InputError("coupling dimensions do not match the measures");
  }
  Vector r, c;
  pi.marginals(r, c);
  return (r - a).lpNorm<1>() + (c - b).lpNorm<1>();
}

double marginal_error(const ImplicitCoupling& pi, const DiscreteMeasure& alpha,
                      const DiscreteMeasure& beta) {
  return marginal_error(pi, alpha.weights(), beta.weights());
}

double kl_divergence(const Matrix& pi, const Vector& a, const Vector& b) {
  if (pi.rows() != a.size() || pi.cols() != b.size()) {
    throw InputError("coupling dimensions do not match the measures");
  }
  double kl = 0.0;
  for (Index i = 0; i < pi.rows(); ++i) {
    double s = 0.0;
    for (Index j = 0; j < pi.cols(); ++j) {
      const double p = pi(i, j);
      if (p > 0.0) s += p * std::log(p / (a[i] * b[j]));
    }
    kl += s;
  }
  return kl;
}

double kl_divergence(const DenseCoupling& pi, const DiscreteMeasure& alpha,
                     const DiscreteMeasure& beta) {
  return kl_divergence(pi.pi, alpha.weights(), beta.weights());
}

}  // namespace egw
