#include "egw/cost_provider.hpp"

#include <sstream>

namespace egw {

void CostProvider::row(Index i, std::span<double> out) const {
  for (Index j = 0; j < cols(); ++j) out[j] = at(i, j);
}

void CostProvider::col(Index j, std::span<double> out) const {
  for (Index i = 0; i < rows(); ++i) out[i] = at(i, j);
}

DenseCost::DenseCost(Matrix cost) : cost_(std::move(cost)), transposed_(cost_.transpose()) {
  if (!cost_.allFinite()) throw InputError("cost matrix has non-finite entries");
}

void DenseCost::row(Index i, std::span<double> out) const {
  const double* src = cost_.data() + i * cost_.cols();
  std::copy(src, src + cost_.cols(), out.begin());
}

void DenseCost::col(Index j, std::span<double> out) const {
  const double* src = transposed_.data() + j * transposed_.cols();
  std::copy(src, src + transposed_.cols(), out.begin());
}

std::string DenseCost::describe() const {
  std::ostringstream os;
  os << "dense(" << cost_.rows() << "x" << cost_.cols() << ")";
  return os.str();
}

SquaredEuclideanCost::SquaredEuclideanCost(Matrix source, Matrix target)
    : source_(std::move(source)), target_(std::move(target)) {
  if (source_.cols() != target_.cols()) {
    throw InputError("squared Euclidean cost: source and target dimensions differ");
  }
}

double SquaredEuclideanCost::at(Index i, Index j) const {
  double s = 0.0;
  for (Index k = 0; k < source_.cols(); ++k) {
    const double d = source_(i, k) - target_(j, k);
    s += d * d;
  }
  return s;
}

void SquaredEuclideanCost::row(Index i, std::span<double> out) const {
  const Index m = target_.rows();
  const Index dim = source_.cols();
  std::fill(out.begin(), out.begin() + m, 0.0);
  for (Index k = 0; k < dim; ++k) {
    const double x = source_(i, k);
    for (Index j = 0; j < m; ++j) {
      const double d = x - target_(j, k);
      out[j] += d * d;
    }
  }
}

void SquaredEuclideanCost::col(Index j, std::span<double> out) const {
  const Index n = source_.rows();
  const Index dim = source_.cols();
  std::fill(out.begin(), out.begin() + n, 0.0);
  for (Index k = 0; k < dim; ++k) {
    const double z = target_(j, k);
    for (Index i = 0; i < n; ++i) {
      const double d = source_(i, k) - z;
      out[i] += d * d;
    }
  }
}

std::string SquaredEuclideanCost::describe() const {
  std::ostringstream os;
  os << "sq_euclidean(" << source_.rows() << "x" << target_.rows() << ", dim " << source_.cols()
     << ")";
  return os.str();
}

std::shared_ptr<const DenseCost> materialize(const std::shared_ptr<const CostProvider>& cost) {
  if (auto dense = std::dynamic_pointer_cast<const DenseCost>(cost)) return dense;
  Matrix m(cost->rows(), cost->cols());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < m.rows(); ++i) {
    cost->row(i, std::span<double>(m.data() + i * m.cols(), static_cast<size_t>(m.cols())));
  }
  return std::make_shared<const DenseCost>(std::move(m));
}

}  // namespace egw
