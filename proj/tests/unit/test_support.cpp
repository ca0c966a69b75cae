#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "egw/eigensolver.hpp"
#include "egw/kmeans.hpp"
#include "helpers.hpp"

using namespace egw;

TEST_SUITE("support") {
  TEST_CASE("random rotations are proper orthogonal") {
    test::Rng rng(111);
    for (Index d : {1, 2, 3, 5}) {
      const Matrix r = synthetic::random_rotation(rng, d);
      CHECK(test::max_abs_diff(r * r.transpose(), Matrix::Identity(d, d)) < 1e-12);
      CHECK(r.determinant() == doctest::Approx(1.0));
    }
  }

  TEST_CASE("permutations, spheres and shapes") {
    test::Rng rng(112);
    std::vector<Index> perm = synthetic::random_permutation(rng, 30);
    std::sort(perm.begin(), perm.end());
    for (Index i = 0; i < 30; ++i) CHECK(perm[i] == i);

    const Matrix s = synthetic::sphere(rng, 100, 3);
    CHECK((s.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);

    const Matrix b = synthetic::separated_ball(rng, 40, 2, 0.1);
    CHECK(b.rowwise().norm().maxCoeff() <= 1.0);
    double closest = 1e300;
    for (Index i = 0; i < 40; ++i) {
      for (Index j = i + 1; j < 40; ++j) closest = std::min(closest, (b.row(i) - b.row(j)).norm());
    }
    CHECK(closest >= 0.1);
    CHECK_THROWS_AS(synthetic::separated_ball(rng, 1000, 2, 0.5), InputError);

    const Matrix m = synthetic::mirror_shape(rng, 10);
    for (Index k = 0; k < 10; ++k) {
      CHECK(m(2 * k, 0) == -m(2 * k + 1, 0));
      CHECK(m(2 * k, 1) == m(2 * k + 1, 1));
    }

    const Vector w = synthetic::random_weights(rng, 50);
    CHECK(w.sum() == doctest::Approx(1.0));
    CHECK(w.maxCoeff() / w.minCoeff() <= 3.0);
  }

  TEST_CASE("rotate and permute") {
    test::Rng rng(113);
    const Matrix p = synthetic::gaussian_cloud(rng, 12, 3);
    const Matrix r = synthetic::random_rotation(rng, 3);
    const std::vector<Index> perm = synthetic::random_permutation(rng, 12);
    const Matrix q = synthetic::rotate_permute(p, r, perm);
    for (Index i = 0; i < 12; ++i) {
      CHECK(q.row(i).norm() == doctest::Approx(p.row(perm[i]).norm()));
      for (Index j = 0; j < 12; ++j) {
        CHECK((q.row(i) - q.row(j)).norm() == doctest::Approx((p.row(perm[i]) - p.row(perm[j])).norm()));
      }
    }
  }

  TEST_CASE("weighted k-means") {
    test::Rng rng(114);
    Matrix p(60, 2);
    p.topRows(30) = 0.05 * synthetic::gaussian_cloud(rng, 30, 2);
    p.bottomRows(30) = 0.05 * synthetic::gaussian_cloud(rng, 30, 2);
    p.bottomRows(30).col(0).array() += 5.0;
    const Vector w = synthetic::random_weights(rng, 60);
    const KMeansResult r = weighted_kmeans(p, w, 2, 3);
    CHECK(r.weights.sum() == doctest::Approx(1.0));
    for (Index i = 1; i < 30; ++i) CHECK(r.labels[i] == r.labels[0]);
    for (Index i = 31; i < 60; ++i) CHECK(r.labels[i] == r.labels[30]);
    CHECK(r.labels[0] != r.labels[30]);
    // centroids are weighted means of their members
    for (Index c = 0; c < 2; ++c) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(2);
      double mass = 0.0;
      for (Index i = 0; i < 60; ++i) {
        if (r.labels[i] != c) continue;
        mean += w[i] * p.row(i);
        mass += w[i];
      }
      CHECK(mass == doctest::Approx(r.weights[c]));
      CHECK((mean / mass - r.centroids.row(c)).norm() < 1e-12);
    }
    const KMeansResult again = weighted_kmeans(p, w, 2, 3);
    CHECK(again.labels == r.labels);
    CHECK(again.centroids == r.centroids);
  }

  TEST_CASE("k-means with as many clusters as points") {
    test::Rng rng(115);
    const Matrix p = synthetic::gaussian_cloud(rng, 15, 2);
    const KMeansResult r = weighted_kmeans(p, uniform_weights(15), 15, 1);
    CHECK(std::set<Index>(r.labels.begin(), r.labels.end()).size() == 15);
    for (Index i = 0; i < 15; ++i) CHECK((r.centroids.row(r.labels[i]) - p.row(i)).norm() == 0.0);
  }

  TEST_CASE("eigensolver helpers") {
    test::Rng rng(116);
    const Matrix a = synthetic::gaussian_cloud(rng, 8, 8);
    const Matrix s = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(s);
    CHECK(min_eigenvalue(s) == doctest::Approx(ref.eigenvalues()[0]));
    const SymmetricEigen top = top_eigenpairs(s, 3);
    for (Index k = 0; k < 3; ++k) {
      CHECK(top.values[k] == doctest::Approx(ref.eigenvalues()[7 - k]));
      Index arg = 0;
      top.vectors.col(k).cwiseAbs().maxCoeff(&arg);
      CHECK(top.vectors(arg, k) > 0.0);
    }
  }
}
