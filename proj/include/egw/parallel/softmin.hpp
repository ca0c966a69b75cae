#pragma once

#include "egw/types.hpp"

// Inner kernels of every Sinkhorn-type loop. Two builds of the same math:
// `egw::parallel` is OpenMP-parallel over rows and vectorized (fast-math TU),
// `egw::serial` is the plain reference kept for testing and benchmarking.
//
// Conventions: `h_j = log b_j + g_j / eps` is precomputed by the caller so that
//   softmin_i = -eps * log sum_j exp(h_j - c_ij / eps)
//             = -eps * log sum_j b_j exp((g_j - c_ij) / eps).
// Each row is reduced by a single thread in index order, so results do not
// depend on the number of threads.

namespace egw::parallel {

double softmin_row(const double* cost_row, const double* h, Index n, double eps);

/// out(i) = softmin over row i of `cost`. Parallel over rows.
void softmin_rows(const Matrix& cost, const Vector& h, double eps, Vector& out);

/// out_j = exp(base + h_j - c_j / eps); with base = log a_i + f_i / eps this is pi_ij.
void coupling_row(const double* cost_row, const double* h, Index n, double base, double eps,
                  double* out);

}  // namespace egw::parallel

namespace egw::serial {

double softmin_row(const double* cost_row, const double* h, Index n, double eps);
void softmin_rows(const Matrix& cost, const Vector& h, double eps, Vector& out);
void coupling_row(const double* cost_row, const double* h, Index n, double base, double eps,
                  double* out);

}  // namespace egw::serial
