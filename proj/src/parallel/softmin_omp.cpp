// Compiled with -ffast-math: no isfinite() checks in here, callers validate.
#include <algorithm>
#include <cmath>

#include "egw/parallel/softmin.hpp"

namespace egw::parallel {

namespace {

// Vectorized exp falls back to a scalar path for arguments that underflow, which
// at low temperature is most of them; terms below e^-700 vanish in the sums anyway.
constexpr double kExpFloor = -700.0;

}  // namespace

double softmin_row(const double* cost_row, const double* h, Index n, double eps) {
  const double inv_eps = 1.0 / eps;
  double m = h[0] - cost_row[0] * inv_eps;
#pragma omp simd reduction(max : m)
  for (Index j = 1; j < n; ++j) {
    const double v = h[j] - cost_row[j] * inv_eps;
    m = v > m ? v : m;
  }
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (Index j = 0; j < n; ++j) {
    s += std::exp(std::max(h[j] - cost_row[j] * inv_eps - m, kExpFloor));
  }
  return -eps * (m + std::log(s));
}

void softmin_rows(const Matrix& cost, const Vector& h, double eps, Vector& out) {
  const Index rows = cost.rows();
  const Index cols = cost.cols();
  out.resize(rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows; ++i) {
    out[i] = softmin_row(cost.data() + i * cols, h.data(), cols, eps);
  }
}

void coupling_row(const double* cost_row, const double* h, Index n, double base, double eps,
                  double* out) {
  const double inv_eps = 1.0 / eps;
#pragma omp simd
  for (Index j = 0; j < n; ++j) {
    const double v = base + h[j] - cost_row[j] * inv_eps;
    out[j] = v > kExpFloor ? std::exp(std::max(v, kExpFloor)) : 0.0;
  }
}

}  // namespace egw::parallel
