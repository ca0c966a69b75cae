#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <random>
#include <vector>

#include <omp.h>

#include "egw/cost_provider.hpp"
#include "egw/parallel/softmin.hpp"
#include "egw/sinkhorn.hpp"

using namespace egw;

namespace {

template <class F>
double best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

}  // namespace

// Usage: softmin_bench [n ...]   (square problems, default 500 1000 2000 4000)
int main(int argc, char** argv) {
  std::vector<Index> sizes;
  for (int k = 1; k < argc; ++k) sizes.push_back(std::atol(argv[k]));
  if (sizes.empty()) sizes = {500, 1000, 2000, 4000};

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%6s %8s %12s %12s %8s %10s %12s %12s %8s\n", "n", "eps", "rows_serial", "rows_omp", "speedup",
              "max_diff", "sink_serial", "sink_omp", "speedup");
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss;
  for (Index n : sizes) {
    Matrix x(n, 3);
    Matrix y(n, 3);
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < 3; ++k) {
        x(i, k) = gauss(rng);
        y(i, k) = gauss(rng);
      }
    }
    Matrix c(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) c(i, j) = (x.row(i) - y.row(j)).squaredNorm();
    }
    const Vector a = Vector::Constant(n, 1.0 / n);
    Vector h(n);
    for (Index j = 0; j < n; ++j) h[j] = std::log(a[j]) + 0.1 * gauss(rng);
    for (double eps : {1e-1, 1e-3}) {
      Vector out_s(n);
      Vector out_p(n);
      const int reps = n <= 1000 ? 10 : 3;
      const double ts = best_of(reps, [&] { serial::softmin_rows(c, h, eps, out_s); });
      const double tp = best_of(reps, [&] { parallel::softmin_rows(c, h, eps, out_p); });
      const double diff = ((out_s - out_p).array().abs() / out_s.array().abs().max(1.0)).maxCoeff();

      auto cost = std::make_shared<DenseCost>(c);
      SinkhornConfig cfg;
      cfg.eps = eps;
      cfg.budget = FixedBudget{20};
      cfg.reference_kernels = true;
      const double ss = best_of(1, [&] { sinkhorn(a, a, cost, cfg); });
      cfg.reference_kernels = false;
      const double sp = best_of(1, [&] { sinkhorn(a, a, cost, cfg); });
      std::printf("%6ld %8.0e %10.3fms %10.3fms %7.2fx %10.2e %10.3fms %10.3fms %7.2fx\n", static_cast<long>(n), eps,
                  1e3 * ts, 1e3 * tp, ts / tp, diff, 1e3 * ss, 1e3 * sp, ss / sp);
    }
  }
  return 0;
}
