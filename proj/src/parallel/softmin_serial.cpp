#include <algorithm>
#include <cmath>
#include <limits>

#include "egw/parallel/softmin.hpp"

namespace egw::serial {

double softmin_row(const double* cost_row, const double* h, Index n, double eps) {
  double m = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < n; ++j) {
    m = std::max(m, h[j] - cost_row[j] / eps);
  }
  double s = 0.0;
  for (Index j = 0; j < n; ++j) {
    s += std::exp(h[j] - cost_row[j] / eps - m);
  }
  return -eps * (m + std::log(s));
}

void softmin_rows(const Matrix& cost, const Vector& h, double eps, Vector& out) {
  out.resize(cost.rows());
  for (Index i = 0; i < cost.rows(); ++i) {
    out[i] = softmin_row(cost.data() + i * cost.cols(), h.data(), cost.cols(), eps);
  }
}

void coupling_row(const double* cost_row, const double* h, Index n, double base, double eps,
                  double* out) {
  for (Index j = 0; j < n; ++j) {
    out[j] = std::exp(base + h[j] - cost_row[j] / eps);
  }
}

}  // namespace egw::serial
