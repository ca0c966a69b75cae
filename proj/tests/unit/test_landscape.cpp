#include <doctest.h>

#include <cmath>
#include <vector>

#include "egw/landscape.hpp"
#include "helpers.hpp"

using namespace egw;

namespace {

EgwConfig landscape_cfg() {
  EgwConfig cfg;
  cfg.eps = 1e-2;
  cfg.inner.budget = ThresholdBudget{1e-8, 1000000};
  return cfg;
}

EmbeddedMeasure mirror_cloud(test::Rng& rng, Index half) {
  return test::embed_sq(normalize_radius(DiscreteMeasure(synthetic::mirror_shape(rng, half))));
}

}  // namespace

TEST_SUITE("landscape") {
  TEST_CASE("single linkage") {
    std::vector<Matrix> items;
    for (const double v : {0.0, 0.05, 1.0, 0.1, 1.04, 3.0}) items.push_back(Matrix::Constant(1, 1, v));
    const std::vector<int> labels = single_linkage(items, 0.06);
    CHECK(labels == std::vector<int>{0, 0, 1, 0, 1, 2});
  }

  TEST_CASE("one seed gives one minimum") {
    test::Rng rng(91);
    const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 60, 2));
    const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 50, 2));
    LandscapeConfig lc;
    lc.n_seeds = 1;
    const LandscapeReport r = explore(x, y, landscape_cfg(), lc);
    REQUIRE(r.minima.size() == 1);
    CHECK(r.minima[0].basin_count == 1);
    CHECK(r.n_seeds == 1);
  }

  TEST_CASE("identical starts share one basin") {
    test::Rng rng(92);
    const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 60, 2));
    const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 50, 2));
    LandscapeConfig lc;
    lc.n_seeds = 6;
    lc.init_scale = 0.0;
    const LandscapeReport r = explore(x, y, landscape_cfg(), lc);
    REQUIRE(r.minima.size() == 1);
    CHECK(r.minima[0].basin_count == 6);
  }

  TEST_CASE("mirror symmetry maps minima to minima") {
    test::Rng rng(93);
    const EmbeddedMeasure x = mirror_cloud(rng, 40);
    const EmbeddedMeasure y = mirror_cloud(rng, 35);
    LandscapeConfig lc;
    lc.n_seeds = 50;
    lc.seed = 4;
    const LandscapeReport r = explore(x, y, landscape_cfg(), lc);
    CHECK(r.minima.size() >= 2);
    int basins = 0;
    for (const LocalMinimum& m : r.minima) basins += m.basin_count;
    CHECK(basins + r.failures == r.n_seeds);
    for (std::size_t a = 0; a < r.minima.size(); ++a) {
      for (std::size_t b = a + 1; b < r.minima.size(); ++b) {
        CHECK((r.minima[a].gamma - r.minima[b].gamma).norm() > r.dedup_tol);
      }
    }
    // mirroring the source flips the sign of the first feature coordinate
    const Matrix flip = Eigen::Vector2d(-1.0, 1.0).asDiagonal();
    for (const LocalMinimum& m : r.minima) {
      const Matrix mirrored = flip * m.gamma;
      double nearest = 1e300;
      for (const LocalMinimum& o : r.minima) nearest = std::min(nearest, (o.gamma - mirrored).norm());
      CHECK(nearest <= r.dedup_tol);
    }
  }

  TEST_CASE("report invariants and determinism") {
    test::Rng rng(94);
    const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 60, 3));
    const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 50, 3));
    LandscapeConfig lc;
    lc.n_seeds = 8;
    lc.seed = 9;
    const LandscapeReport r = explore(x, y, landscape_cfg(), lc);
    REQUIRE_FALSE(r.minima.empty());
    for (std::size_t k = 1; k < r.minima.size(); ++k) CHECK(r.minima[k].basin_count <= r.minima[k - 1].basin_count);
    for (const LocalMinimum& m : r.minima) CHECK(m.grad_norm <= 1e-4 * m.gamma.norm());
    CHECK(r.loadings.rows() == 2);
    CHECK(r.loadings.cols() == 9);
    CHECK(test::max_abs_diff(r.loadings * r.loadings.transpose(), Matrix::Identity(2, 2)) < 1e-9);
    CHECK(r.coords.rows() == static_cast<Index>(r.minima.size()));

    const LandscapeReport again = explore(x, y, landscape_cfg(), lc);
    REQUIRE(again.minima.size() == r.minima.size());
    for (std::size_t k = 0; k < r.minima.size(); ++k) {
      CHECK(again.minima[k].gamma == r.minima[k].gamma);
      CHECK(again.minima[k].objective == r.minima[k].objective);
    }
  }

  TEST_CASE("objective grid") {
    test::Rng rng(95);
    const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 30, 2, true));
    const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 25, 2, true));
    EgwConfig cfg = landscape_cfg();
    cfg.inner.budget = ThresholdBudget{1e-12, 1000000};
    cfg.outer_tol = 1e-13;
    cfg.gamma_tol = 1e-11;
    cfg.max_outer = 5000;
    const CntResult r = solve_cnt_gw(x, y, cfg);
    Matrix d1 = Matrix::Zero(2, 2), d2 = Matrix::Zero(2, 2);
    d1(0, 0) = 1.0;
    d2(1, 0) = 1.0;

    const Matrix at = objective_grid(x, y, cfg, r.gamma, d1, d2, {0.0}, {0.0});
    CHECK(at.rows() == 1);
    CHECK(at.cols() == 1);
    CHECK(at(0, 0) == doctest::Approx(r.objective).epsilon(1e-8));

    const Matrix line = objective_grid(x, y, cfg, r.gamma, d1, d2, {-1e-2, 0.0, 1e-2}, {0.0});
    CHECK(line(1, 0) <= line(0, 0));
    CHECK(line(1, 0) <= line(2, 0));

    const Matrix zero = objective_grid(x, y, cfg, Matrix::Zero(2, 2), d1, d2, {0.0}, {0.0});
    const PiStepResult ps = pi_step(Matrix::Zero(2, 2), x, y, cfg.eps, cfg.inner);
    CHECK(zero(0, 0) == doctest::Approx(egw_objective(Matrix::Zero(2, 2), ps.coupling, x, y, cfg.eps)).epsilon(1e-9));
  }
}
