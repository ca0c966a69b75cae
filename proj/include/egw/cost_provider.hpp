#pragma once

#include <memory>
#include <span>
#include <string>

#include "egw/types.hpp"

namespace egw {

/// Evaluates the ground cost c(i, j) of an N x M transport problem on demand.
class CostProvider {
 public:
  virtual ~CostProvider() = default;

  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual double at(Index i, Index j) const = 0;

  /// out[j] = c(i, j) for j < cols().
  virtual void row(Index i, std::span<double> out) const;
  /// out[i] = c(i, j) for i < rows().
  virtual void col(Index j, std::span<double> out) const;

  virtual std::string describe() const = 0;
};

/// Dense N x M matrix; keeps a transposed copy so column sweeps are contiguous.
class DenseCost final : public CostProvider {
 public:
  explicit DenseCost(Matrix cost);

  Index rows() const override { return cost_.rows(); }
  Index cols() const override { return cost_.cols(); }
  double at(Index i, Index j) const override { return cost_(i, j); }
  void row(Index i, std::span<double> out) const override;
  void col(Index j, std::span<double> out) const override;
  std::string describe() const override;

  const Matrix& matrix() const noexcept { return cost_; }
  const Matrix& transposed() const noexcept { return transposed_; }

 private:
  Matrix cost_;
  Matrix transposed_;
};

/// c(i, j) = ||x_i - z_j||^2 accumulated coordinate by coordinate, so the value is
/// bit-identical when the roles of the two clouds are swapped.
class SquaredEuclideanCost final : public CostProvider {
 public:
  SquaredEuclideanCost(Matrix source, Matrix target);

  Index rows() const override { return source_.rows(); }
  Index cols() const override { return target_.rows(); }
  double at(Index i, Index j) const override;
  void row(Index i, std::span<double> out) const override;
  void col(Index j, std::span<double> out) const override;
  std::string describe() const override;

  const Matrix& source() const noexcept { return source_; }
  const Matrix& target() const noexcept { return target_; }

 private:
  Matrix source_;
  Matrix target_;
};

/// Materializes any provider into a DenseCost (returns the input when already dense).
std::shared_ptr<const DenseCost> materialize(const std::shared_ptr<const CostProvider>& cost);

}  // namespace egw
