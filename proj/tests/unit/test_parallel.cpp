#include <doctest.h>

#include <cmath>
#include <vector>

#include "egw/parallel/softmin.hpp"
#include "helpers.hpp"

using namespace egw;

namespace {

// Long-double log-sum-exp oracle.
double softmin_oracle(const double* c, const double* h, Index n, double eps) {
  long double m = -INFINITY;
  for (Index j = 0; j < n; ++j) m = std::max(m, (long double)h[j] - c[j] / (long double)eps);
  long double s = 0;
  for (Index j = 0; j < n; ++j) s += std::exp((long double)h[j] - c[j] / (long double)eps - m);
  return double(-(long double)eps * (m + std::log(s)));
}

}  // namespace

TEST_SUITE("parallel") {
  TEST_CASE("softmin rows match the long-double oracle") {
    test::Rng rng(41);
    const Matrix c = test::random_cost(rng, 50, 37);
    const Vector h = Vector::Random(37);
    for (const double eps : {10.0, 1e-1, 1e-3, 1e-5}) {
      Vector fast, ref;
      parallel::softmin_rows(c, h, eps, fast);
      serial::softmin_rows(c, h, eps, ref);
      for (Index i = 0; i < 50; ++i) {
        const double o = softmin_oracle(c.row(i).data(), h.data(), 37, eps);
        CHECK(ref[i] == doctest::Approx(o).epsilon(1e-13));
        CHECK(fast[i] == doctest::Approx(o).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("serial and parallel rows agree on large values") {
    test::Rng rng(42);
    Matrix c = 1e3 * test::random_cost(rng, 64, 129);
    const Vector h = 50.0 * Vector::Random(129);
    Vector fast, ref;
    parallel::softmin_rows(c, h, 1e-2, fast);
    serial::softmin_rows(c, h, 1e-2, ref);
    CHECK(((fast - ref).array().abs() / ref.array().abs().max(1.0)).maxCoeff() < 1e-12);
  }

  TEST_CASE("softmin of a single entry") {
    const double c = 0.4, h = -0.3, eps = 0.2;
    CHECK(parallel::softmin_row(&c, &h, 1, eps) == doctest::Approx(c - eps * h));
    CHECK(serial::softmin_row(&c, &h, 1, eps) == doctest::Approx(c - eps * h));
  }

  TEST_CASE("coupling rows") {
    test::Rng rng(43);
    const Matrix c = test::random_cost(rng, 1, 33);
    const Vector h = Vector::Random(33);
    std::vector<double> fast(33), ref(33);
    parallel::coupling_row(c.data(), h.data(), 33, -0.7, 0.05, fast.data());
    serial::coupling_row(c.data(), h.data(), 33, -0.7, 0.05, ref.data());
    for (Index j = 0; j < 33; ++j) {
      const double o = std::exp(-0.7 + h[j] - c(0, j) / 0.05);
      CHECK(ref[j] == doctest::Approx(o).epsilon(1e-14));
      CHECK(fast[j] == doctest::Approx(o).epsilon(1e-12));
    }
  }
}
