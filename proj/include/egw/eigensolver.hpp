#pragma once

#include "egw/types.hpp"

namespace egw {

struct SymmetricEigen {
  Vector values;   // descending
  Eigen::MatrixXd vectors;  // column k pairs with values[k]
  int sweeps = 0;  // subspace iterations used (0 for the dense path)
};

/// Largest `count` eigenpairs of a symmetric matrix, sorted by decreasing value.
/// Dense decomposition up to `dense_limit` rows, shifted subspace iteration above.
/// Each eigenvector is flipped so that its largest-magnitude entry is positive.
SymmetricEigen top_eigenpairs(const Matrix& k, Index count, Index dense_limit = 4096,
                              double tol = 1e-8, int max_sweeps = 1000);

/// Smallest eigenvalue of a symmetric matrix (dense decomposition).
double min_eigenvalue(const Matrix& k);

void fix_signs(Eigen::MatrixXd& vectors);

}  // namespace egw
