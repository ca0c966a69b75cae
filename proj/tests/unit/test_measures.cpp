#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "egw/io.hpp"
#include "egw/measures.hpp"
#include "egw/sinkhorn.hpp"
#include "helpers.hpp"

using namespace egw;

TEST_SUITE("measures") {
  TEST_CASE("marginal error of hand examples") {
    const Vector a = uniform_weights(2);
    CHECK(marginal_error(DenseCoupling::product(a, a).pi, a, a) == doctest::Approx(0.0));
    Matrix corner(2, 2);
    corner << 1, 0, 0, 0;
    CHECK(marginal_error(corner, a, a) == doctest::Approx(2.0));
    CHECK(marginal_error(Matrix::Zero(2, 2), a, a) == doctest::Approx(2.0));
  }

  TEST_CASE("marginal error rejects mismatched sizes") {
    CHECK_THROWS_AS(marginal_error(Matrix::Zero(2, 3), uniform_weights(2), uniform_weights(2)), InputError);
  }

  TEST_CASE("densify single entry and constant cost") {
    ImplicitCoupling one;
    one.f = Vector::Zero(1);
    one.g = Vector::Zero(1);
    one.a = Vector::Ones(1);
    one.b = Vector::Ones(1);
    one.eps_eff = 1.0;
    one.cost = std::make_shared<DenseCost>(Matrix::Zero(1, 1));
    CHECK(densify(one).pi(0, 0) == doctest::Approx(1.0));

    ImplicitCoupling flat;
    flat.f = Vector::Zero(2);
    flat.g = Vector::Zero(2);
    flat.a = uniform_weights(2);
    flat.b = uniform_weights(2);
    flat.eps_eff = 1.0;
    flat.cost = std::make_shared<DenseCost>(Matrix::Zero(2, 2));
    const Matrix pi = densify(flat).pi;
    CHECK(test::max_abs_diff(pi, Matrix::Constant(2, 2, 0.25)) < 1e-15);
  }

  TEST_CASE("densify after symmetrized Sinkhorn is feasible") {
    test::Rng rng(3);
    const Vector a = synthetic::random_weights(rng, 2);
    const Vector b = synthetic::random_weights(rng, 2);
    SinkhornConfig cfg;
    cfg.eps = 0.5;
    cfg.budget = FixedBudget{50};
    const SinkhornResult r = sinkhorn(a, b, std::make_shared<DenseCost>(test::random_cost(rng, 2, 2)), cfg);
    CHECK(marginal_error(densify(r.coupling).pi, a, b) < 1e-4);
  }

  TEST_CASE("densify reports non-finite entries") {
    ImplicitCoupling bad;
    bad.f = Vector::Constant(1, 1e6);
    bad.g = Vector::Zero(1);
    bad.a = Vector::Ones(1);
    bad.b = Vector::Ones(1);
    bad.eps_eff = 1e-3;
    bad.cost = std::make_shared<DenseCost>(Matrix::Zero(1, 1));
    CHECK_THROWS_AS(densify(bad), SolverError);
  }

  TEST_CASE("KL divergence of hand examples") {
    const Vector a = uniform_weights(2);
    CHECK(kl_divergence(DenseCoupling::product(a, a).pi, a, a) == doctest::Approx(0.0));
    Matrix diag = Matrix::Zero(2, 2);
    diag(0, 0) = diag(1, 1) = 0.5;
    CHECK(kl_divergence(diag, a, a) == doctest::Approx(2.0 * 0.5 * std::log(0.5 / 0.25)));
    test::Rng rng(4);
    for (int k = 0; k < 20; ++k) {
      const Vector w = synthetic::random_weights(rng, 4);
      const Vector v = synthetic::random_weights(rng, 5);
      SinkhornConfig cfg;
      cfg.eps = 0.1;
      cfg.budget = ThresholdBudget{1e-12, 100000};
      const Matrix pi = densify(sinkhorn(w, v, std::make_shared<DenseCost>(test::random_cost(rng, 4, 5)), cfg).coupling).pi;
      CHECK(kl_divergence(pi, w, v) >= 0.0);
    }
  }

  TEST_CASE("weights are validated") {
    CHECK_THROWS_AS(DiscreteMeasure(Matrix::Zero(2, 1), Vector::Constant(2, 0.3)), InputError);
    CHECK_THROWS_AS(DiscreteMeasure(Matrix::Zero(2, 1), Vector((Vector(2) << 1.0, 0.0).finished())), InputError);
    CHECK_NOTHROW(DiscreteMeasure(Matrix::Zero(2, 1), uniform_weights(2)));
  }

  TEST_CASE("radius normalization uses the weighted centroid") {
    Matrix p(3, 1);
    p << 0, 1, 4;
    const Vector w = (Vector(3) << 0.25, 0.5, 0.25).finished();
    const DiscreteMeasure m = normalize_radius(DiscreteMeasure(p, w));
    // centroid 1.5, farthest point at distance 2.5
    CHECK(m.points()(2, 0) == doctest::Approx(4.0 / 2.5));
    CHECK((m.points().rowwise() - m.centroid()).rowwise().norm().maxCoeff() == doctest::Approx(1.0));
  }

  TEST_CASE("csv input and output") {
    const auto dir = std::filesystem::temp_directory_path() / "egw_unit_io";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "pts.csv").string();
    {
      std::ofstream os(path);
      os << "# comment\nx0,x1,w\n0,0,1\n1,0,3\n";
    }
    const DiscreteMeasure m = read_points(path);
    CHECK(m.size() == 2);
    CHECK(m.dim() == 2);
    CHECK(m.weights()[1] == doctest::Approx(0.75));

    Matrix pi(2, 2);
    pi << 0.5, 1e-20, 0.0, 0.5;
    const std::string trip = (dir / "pi.csv").string();
    write_triplets(trip, pi, {"test"});
    const CsvTable t = read_csv(trip);
    CHECK(t.header == std::vector<std::string>{"i", "j", "value"});
    CHECK(t.values.rows() == 2);

    CHECK_THROWS_AS(read_points((dir / "missing.csv").string()), InputError);
    {
      std::ofstream os(path);
      os << "1,2\n3\n";
    }
    CHECK_THROWS_AS(read_points(path), InputError);
  }
}
