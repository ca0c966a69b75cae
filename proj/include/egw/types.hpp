#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace egw {

using Index = Eigen::Index;
/// Point sets, couplings and cost matrices are stored row-major: row i is point i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: bad weights, malformed files, inconsistent dimensions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside a solver (overflow, divergence, exhausted budget).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace egw
