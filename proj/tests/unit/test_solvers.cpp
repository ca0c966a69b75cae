#include <doctest.h>

#include <cmath>
#include <vector>

#include "egw/divergence.hpp"
#include "egw/solvers.hpp"
#include "helpers.hpp"

using namespace egw;

namespace {

SinkhornConfig fixed_inner(int it, SinkhornMode mode = SinkhornMode::Symmetrized) {
  SinkhornConfig s;
  s.budget = FixedBudget{it};
  s.mode = mode;
  return s;
}

SinkhornConfig threshold_inner(double tol) {
  SinkhornConfig s;
  s.budget = ThresholdBudget{tol, 1000000};
  return s;
}

Matrix sq_costs(const Matrix& x) { return cost_matrix(x, CostSpec::sq_euclidean()); }

Matrix permutation_plan(const std::vector<Index>& perm) {
  const Index n = static_cast<Index>(perm.size());
  Matrix pi = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) pi(perm[i], i) = 1.0 / double(n);
  return pi;
}

// Plan that is feasible for (a, b) but far from the product: Sinkhorn on a random cost.
Matrix random_plan(test::Rng& rng, const Vector& a, const Vector& b) {
  SinkhornConfig cfg;
  cfg.eps = 0.05;
  cfg.budget = ThresholdBudget{1e-13, 100000};
  return densify(sinkhorn(a, b, std::make_shared<DenseCost>(test::random_cost(rng, a.size(), b.size())), cfg).coupling).pi;
}

double diagonal_mass(const Matrix& pi) { return pi.diagonal().sum(); }

// Replays a fixed sequence of objective values and records the budgets it was given.
class Scripted final : public OuterIteration {
 public:
  explicit Scripted(std::vector<double> values) : values_(std::move(values)) {}
  OuterStep step(const SinkhornConfig& inner, double) override {
    budgets.push_back(inner.budget);
    OuterStep s;
    s.objective = values_.at(std::min(next_++, values_.size() - 1));
    return s;
  }
  std::vector<std::variant<FixedBudget, ThresholdBudget>> budgets;

 private:
  std::vector<double> values_;
  std::size_t next_ = 0;
};

}  // namespace

TEST_SUITE("solvers") {
  TEST_CASE("gamma step of special plans") {
    test::Rng rng(51);
    const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 12, 3, true));
    const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 9, 2, true));
    const Matrix prod = DenseCoupling::product(x.weights(), y.weights()).pi;
    CHECK(gamma_step(prod, x, y).cwiseAbs().maxCoeff() < 1e-14);

    const EmbeddedMeasure u = test::embed_sq(test::cloud(rng, 10, 3));
    Matrix sigma = Matrix::Zero(3, 3);
    for (Index i = 0; i < 10; ++i) sigma += u.features().row(i).transpose() * u.features().row(i) / 10.0;
    const Matrix ident = Matrix::Identity(10, 10) / 10.0;
    CHECK(test::max_abs_diff(gamma_step(ident, u, u), sigma) < 1e-14);

    const EmbeddedMeasure v = test::embed_sq(test::cloud(rng, 10, 2));
    const std::vector<Index> perm = synthetic::random_permutation(rng, 10);
    Matrix pi = Matrix::Zero(10, 10);
    Matrix expected = Matrix::Zero(3, 2);
    for (Index i = 0; i < 10; ++i) {
      pi(i, perm[i]) = 0.1;
      expected += u.features().row(i).transpose() * v.features().row(perm[i]) / 10.0;
    }
    CHECK(test::max_abs_diff(gamma_step(pi, u, v), expected) < 1e-14);
    CHECK_THROWS_AS(gamma_step(Matrix::Zero(3, 10), u, v), InputError);
  }

  TEST_CASE("implicit and dense gamma steps agree") {
    test::Rng rng(52);
    const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 40, 3, true));
    const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 30, 3, true));
    const Matrix g0 = initial_gamma(RandomInit{1, 1.0}, x, y);
    const PiStepResult ps = pi_step(g0, x, y, 1e-2, fixed_inner(30));
    CHECK(test::max_abs_diff(gamma_step(ps.coupling, x, y), gamma_step(densify(ps.coupling).pi, x, y)) < 1e-13);
  }

  TEST_CASE("pi step on a single pair") {
    const EmbeddedMeasure one(Matrix::Zero(1, 2), Vector::Ones(1));
    const PiStepResult ps = pi_step(Matrix::Zero(2, 2), one, one, 1e-3, fixed_inner(10));
    CHECK(densify(ps.coupling).pi(0, 0) == doctest::Approx(1.0));
  }

  TEST_CASE("pi step at zero Gamma only sees the squared norms") {
    test::Rng rng(53);
    // mirrored pairs share their squared norm on both sides
    const EmbeddedMeasure x = test::embed_sq(normalize_radius(DiscreteMeasure(synthetic::mirror_shape(rng, 6))));
    const EmbeddedMeasure y = test::embed_sq(normalize_radius(DiscreteMeasure(synthetic::mirror_shape(rng, 5))));
    const Matrix pi = densify(pi_step(Matrix::Zero(2, 2), x, y, 0.1, threshold_inner(1e-13)).coupling).pi;
    for (Index i = 0; i < x.size(); ++i) {
      for (Index k = 0; k < x.size(); ++k) {
        if (std::abs(x.half_sq_norms()[i] - x.half_sq_norms()[k]) > 1e-14) continue;
        CHECK((pi.row(i) - pi.row(k)).cwiseAbs().maxCoeff() < 1e-8);
      }
    }
    for (Index j = 0; j < y.size(); ++j) {
      for (Index l = 0; l < y.size(); ++l) {
        if (std::abs(y.half_sq_norms()[j] - y.half_sq_norms()[l]) > 1e-14) continue;
        CHECK((pi.col(j) - pi.col(l)).cwiseAbs().maxCoeff() < 1e-8);
      }
    }
  }

  TEST_CASE("pi step recovers a known isometry") {
    test::Rng rng(54);
    const Matrix p = synthetic::separated_ball(rng, 20, 2, 0.15);
    const std::vector<Index> perm = synthetic::random_permutation(rng, 20);
    const Matrix q = synthetic::rotate_permute(p, synthetic::random_rotation(rng, 2), perm);
    const EmbeddedMeasure x = test::embed_sq(DiscreteMeasure(p));
    const EmbeddedMeasure y = test::embed_sq(DiscreteMeasure(q));
    // target point i is source point perm[i]
    const Matrix truth = permutation_plan(perm);
    const Matrix gamma = gamma_step(truth, x, y);
    const Matrix pi = densify(pi_step(gamma, x, y, 1e-3, threshold_inner(1e-10)).coupling).pi;
    CHECK((pi.array() * truth.array()).sum() * 20.0 >= 0.99);
  }

  TEST_CASE("objective at the product plan is its GW loss") {
    test::Rng rng(55);
    const DiscreteMeasure s = test::cloud(rng, 15, 3, true);
    const DiscreteMeasure t = test::cloud(rng, 11, 2, true);
    const EmbeddedMeasure x = test::embed_sq(s);
    const EmbeddedMeasure y = test::embed_sq(t);
    const Matrix prod = DenseCoupling::product(x.weights(), y.weights()).pi;
    // Gamma*(product) = 0 and the KL term vanishes, but the s_i t_j term does not
    const double loss = gw_loss_bruteforce(prod, sq_costs(s.points()), sq_costs(t.points()));
    CHECK(egw_objective(Matrix::Zero(3, 2), prod, x, y, 1e-2) == doctest::Approx(loss).epsilon(1e-10));
    const double mx = x.weights().dot(x.features().rowwise().squaredNorm());
    const double my = y.weights().dot(y.features().rowwise().squaredNorm());
    CHECK(constant_C(x, y) - loss == doctest::Approx(4.0 * mx * my).epsilon(1e-10));
  }

  TEST_CASE("objective matches the brute-force loss") {
    test::Rng rng(56);
    const DiscreteMeasure u = test::cloud(rng, 10, 3);
    const EmbeddedMeasure x = test::embed_sq(u);
    const Matrix ident = Matrix::Identity(10, 10) / 10.0;
    const double eps = 1e-3;
    const double self = egw_objective(gamma_step(ident, x, x), ident, x, x, eps);
    const double kl = kl_divergence(ident, x.weights(), x.weights());
    const Matrix cx = sq_costs(u.points());
    CHECK(gw_loss_bruteforce(ident, cx, cx) == doctest::Approx(0.0));
    CHECK(self == doctest::Approx(gw_loss_bruteforce(ident, cx, cx) + eps * kl).epsilon(1e-6));

    for (int k = 0; k < 10; ++k) {
      const DiscreteMeasure s = test::cloud(rng, 8 + k, 2 + k % 2, true);
      const DiscreteMeasure t = test::cloud(rng, 12 - k / 2, 3 - k % 2, true);
      const EmbeddedMeasure es = test::embed_sq(s);
      const EmbeddedMeasure et = test::embed_sq(t);
      const Matrix pi = random_plan(rng, s.weights(), t.weights());
      const double lhs = egw_objective(gamma_step(pi, es, et), pi, es, et, 1e-2);
      const double loss = gw_loss_bruteforce(pi, sq_costs(s.points()), sq_costs(t.points()));
      CHECK(lhs == doctest::Approx(loss + 1e-2 * kl_divergence(pi, s.weights(), t.weights())).epsilon(1e-5));
      CHECK(gw_loss(pi, sq_costs(s.points()), sq_costs(t.points())) == doctest::Approx(loss).epsilon(1e-10));
    }
  }

  TEST_CASE("implicit and dense objectives agree") {
    test::Rng rng(57);
    const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 30, 3, true));
    const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 25, 3, true));
    const Matrix g0 = initial_gamma(RandomInit{2, 1.0}, x, y);
    const PiStepResult ps = pi_step(g0, x, y, 1e-2, threshold_inner(1e-12));
    const Matrix g1 = gamma_step(ps.coupling, x, y);
    CHECK(egw_objective(g1, ps.coupling, x, y, 1e-2) ==
          doctest::Approx(egw_objective(g1, densify(ps.coupling).pi, x, y, 1e-2)).epsilon(1e-10));
  }

  TEST_CASE("self-matching from the identity converges at once") {
    test::Rng rng(58);
    const DiscreteMeasure u = test::cloud(rng, 40, 2);
    const EmbeddedMeasure x = test::embed_sq(u);
    EgwConfig cfg;
    cfg.eps = 1e-3;
    cfg.init = GivenInit{gamma_step(Matrix(Matrix::Identity(40, 40) / 40.0), x, x)};
    const CntResult r = solve_cnt_gw(x, x, cfg);
    CHECK(r.trace.converged);
    CHECK(r.trace.rows.size() <= 3);
    const Matrix cx = sq_costs(u.points());
    CHECK(gw_loss(densify(r.coupling).pi, cx, cx) <= 1e-4);
  }

  TEST_CASE("rotated copy is matched to the true correspondence") {
    test::Rng rng(59);
    const Matrix p = synthetic::separated_ball(rng, 50, 2, 0.1);
    const std::vector<Index> perm = synthetic::random_permutation(rng, 50);
    const Matrix q = synthetic::rotate_permute(p, synthetic::random_rotation(rng, 2), perm);
    const EmbeddedMeasure x = test::embed_sq(normalize_radius(DiscreteMeasure(p)));
    const EmbeddedMeasure y = test::embed_sq(normalize_radius(DiscreteMeasure(q)));
    EgwConfig cfg;
    cfg.eps = 1e-3;
    cfg.inner = threshold_inner(1e-6);
    const CntResult r = solve_cnt_gw(x, y, cfg);
    const Matrix pi = densify(r.coupling).pi;
    CHECK((pi.array() * permutation_plan(perm).array()).sum() * 50.0 >= 0.95);
  }

  TEST_CASE("descent is monotone with accurate inner solves") {
    test::Rng rng(60);
    for (int k = 0; k < 3; ++k) {
      const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 60, 2, true));
      const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 50, 3, true));
      EgwConfig cfg;
      cfg.eps = 1e-2;
      cfg.inner = threshold_inner(1e-12);
      cfg.init = RandomInit{std::uint64_t(k), 1.0};
      cfg.outer_tol = 1e-10;
      const CntResult r = solve_cnt_gw(x, y, cfg);
      for (std::size_t t = 1; t < r.trace.rows.size(); ++t) {
        CHECK(r.trace.rows[t].objective <= r.trace.rows[t - 1].objective + 1e-7);
      }
    }
  }

  TEST_CASE("simplex inputs from a zero Gamma") {
    // two regular simplices: every point has the same norm, so the first step is the product plan
    Matrix tri(3, 2);
    tri << 1, 0, -0.5, std::sqrt(3.0) / 2, -0.5, -std::sqrt(3.0) / 2;
    Matrix tet(4, 3);
    tet << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
    const EmbeddedMeasure x = test::embed_sq(normalize_radius(DiscreteMeasure(tri)));
    const EmbeddedMeasure y = test::embed_sq(normalize_radius(DiscreteMeasure(tet)));
    EgwConfig cfg;
    cfg.eps = 1e-2;
    cfg.inner = threshold_inner(1e-12);
    std::vector<Matrix> plans;
    cfg.coupling_observer = [&](int, const Matrix& p) { plans.push_back(p); };
    const CntResult r = solve_cnt_gw(x, y, cfg);
    REQUIRE_FALSE(plans.empty());
    CHECK(test::max_abs_diff(plans[0], DenseCoupling::product(x.weights(), y.weights()).pi) < 1e-10);
    for (std::size_t t = 1; t < r.trace.rows.size(); ++t) {
      CHECK(r.trace.rows[t].objective <= r.trace.rows[t - 1].objective + 1e-7);
    }
  }

  TEST_CASE("outer steps follow the dual gradient") {
    test::Rng rng(61);
    const SinkhornConfig exact = threshold_inner(1e-13);
    for (int k = 0; k < 4; ++k) {
      const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 20, 2, true));
      const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 18, 2, true));
      const double eps = 5e-2;
      const Matrix g = initial_gamma(RandomInit{std::uint64_t(k), 1.0}, x, y);
      const Matrix next = gamma_step(densify(pi_step(g, x, y, eps, exact).coupling).pi, x, y);
      // Gamma_{t+1} - Gamma_t = -grad D / 2, checked along random directions
      for (int d = 0; d < 3; ++d) {
        Matrix h = Matrix::Random(2, 2);
        h /= h.norm();
        const double step = 1e-4;
        const double fd = (dual_objective(g + step * h, x, y, eps, exact) -
                           dual_objective(g - step * h, x, y, eps, exact)) / (2.0 * step);
        const double predicted = -2.0 * ((next - g).array() * h.array()).sum();
        CHECK(fd == doctest::Approx(predicted).epsilon(1e-3));
      }
    }
  }

  TEST_CASE("kernel and full-rank embedded solvers agree") {
    test::Rng rng(62);
    const DiscreteMeasure s = test::cloud(rng, 30, 3, true);
    const DiscreteMeasure t = test::cloud(rng, 30, 3, true);
    const EmbeddedMeasure x = embed_measure(s, CostSpec::sq_euclidean(), 3);
    const EmbeddedMeasure y = embed_measure(t, CostSpec::sq_euclidean(), 3);
    EgwConfig cfg;
    cfg.eps = 1e-2;
    cfg.inner = fixed_inner(500, SinkhornMode::Standard);
    cfg.init = RandomInit{7, 1.0};
    cfg.max_outer = 10;
    cfg.outer_tol = 1e-300;
    cfg.divergence_patience = 1000;
    const CntResult cnt = solve_cnt_gw(x, y, cfg);
    const Matrix g0 = initial_gamma(cfg.init, x, y);
    // a plan W with X^T W Y = Gamma_0 via least squares
    const Eigen::MatrixXd xp = x.features().completeOrthogonalDecomposition().pseudoInverse();
    const Eigen::MatrixXd yp = y.features().completeOrthogonalDecomposition().pseudoInverse();
    const Matrix w = xp.transpose() * g0 * yp;
    REQUIRE(test::max_abs_diff(gamma_step(w, x, y), g0) < 1e-10);
    const DenseResult ker = solve_kernel_gw(sq_costs(s.points()), sq_costs(t.points()), s.weights(), t.weights(), cfg, w);
    CHECK(ker.trace.rows.size() == cnt.trace.rows.size());
    CHECK(test::max_abs_diff(ker.coupling.pi, densify(cnt.coupling).pi) < 1e-4);
    CHECK(ker.objective == doctest::Approx(cnt.objective).epsilon(1e-6));
  }

  TEST_CASE("kernel solver keeps an identity start") {
    test::Rng rng(63);
    const Matrix p = synthetic::separated_ball(rng, 20, 2, 0.15);
    const Matrix c = sq_costs(p);
    EgwConfig cfg;
    cfg.eps = 1e-3;
    const DenseResult r = solve_kernel_gw(c, c, uniform_weights(20), uniform_weights(20), cfg,
                                          Matrix(Matrix::Identity(20, 20) / 20.0));
    CHECK(diagonal_mass(r.coupling.pi) >= 0.99);
  }

  TEST_CASE("kernel solver preserves a mirror symmetry") {
    test::Rng rng(64);
    const DiscreteMeasure s = normalize_radius(DiscreteMeasure(synthetic::mirror_shape(rng, 8)));
    const DiscreteMeasure t = normalize_radius(DiscreteMeasure(synthetic::mirror_shape(rng, 7)));
    // rows 2k and 2k+1 are mirror images
    auto mirror = [](Index i) { return i ^ Index(1); };
    EgwConfig cfg;
    cfg.eps = 1e-2;
    cfg.inner = fixed_inner(100);
    cfg.max_outer = 20;
    cfg.divergence_patience = 1000;
    double worst = 0.0;
    int steps = 0;
    cfg.coupling_observer = [&](int, const Matrix& p) {
      ++steps;
      for (Index i = 0; i < p.rows(); ++i) {
        for (Index j = 0; j < p.cols(); ++j) worst = std::max(worst, std::abs(p(i, j) - p(mirror(i), mirror(j))));
      }
    };
    solve_kernel_gw(sq_costs(s.points()), sq_costs(t.points()), s.weights(), t.weights(), cfg);
    CHECK(steps > 0);
    CHECK(worst < 1e-12);
  }

  TEST_CASE("entropic baseline on zero costs stays at the product plan") {
    test::Rng rng(65);
    const Vector a = synthetic::random_weights(rng, 5);
    const Vector b = synthetic::random_weights(rng, 4);
    EgwConfig cfg;
    cfg.eps = 1e-2;
    double worst = 0.0;
    const Matrix prod = DenseCoupling::product(a, b).pi;
    cfg.coupling_observer = [&](int, const Matrix& p) { worst = std::max(worst, test::max_abs_diff(p, prod)); };
    const DenseResult r = solve_entropic_gw_baseline(Matrix::Zero(5, 5), Matrix::Zero(4, 4), a, b, cfg);
    CHECK(worst < 1e-14);
    CHECK(test::max_abs_diff(r.coupling.pi, prod) < 1e-14);
  }

  TEST_CASE("entropic baseline first step on a two-point toy") {
    Matrix cx(2, 2), cy(2, 2);
    cx << 0, 1, 1, 0;
    cy << 0, 3, 3, 0;
    const Vector a = (Vector(2) << 0.3, 0.7).finished();
    const Vector b = (Vector(2) << 0.6, 0.4).finished();
    // C0_ij = -4 sum_kl cx_ik pi0_kl cy_lj with pi0 = a b^T
    Matrix c0(2, 2);
    for (Index i = 0; i < 2; ++i) {
      for (Index j = 0; j < 2; ++j) {
        double s = 0.0;
        for (Index k = 0; k < 2; ++k) {
          for (Index l = 0; l < 2; ++l) s += cx(i, k) * a[k] * b[l] * cy(l, j);
        }
        c0(i, j) = -4.0 * s;
      }
    }
    EgwConfig cfg;
    cfg.eps = 0.5;
    cfg.inner = fixed_inner(50);
    cfg.max_outer = 1;
    Matrix first;
    cfg.coupling_observer = [&](int t, const Matrix& p) {
      if (t == 0) first = p;
    };
    solve_entropic_gw_baseline(cx, cy, a, b, cfg);
    SinkhornConfig sk = cfg.inner;
    sk.eps = cfg.eps;
    const Matrix oracle = densify(sinkhorn(a, b, std::make_shared<DenseCost>(c0), sk).coupling).pi;
    CHECK(test::max_abs_diff(first, oracle) < 1e-14);
  }

  TEST_CASE("dense solvers enforce the memory guard") {
    EgwConfig cfg;
    cfg.dense_guard = 10;
    const Matrix c = Matrix::Zero(4, 4);
    CHECK_THROWS_AS(solve_kernel_gw(c, c, uniform_weights(4), uniform_weights(4), cfg), InputError);
    CHECK_THROWS_AS(solve_entropic_gw_baseline(c, c, uniform_weights(4), uniform_weights(4), cfg), InputError);
  }

  TEST_CASE("adaptive schedule") {
    test::Rng rng(66);
    const Matrix p = synthetic::separated_ball(rng, 30, 2, 0.1);
    const Matrix q = synthetic::rotate_permute(p, synthetic::random_rotation(rng, 2), synthetic::random_permutation(rng, 30));
    const EmbeddedMeasure x = test::embed_sq(DiscreteMeasure(p));
    const EmbeddedMeasure y = test::embed_sq(DiscreteMeasure(q));
    EgwConfig cfg;
    cfg.eps = 1e-2;
    const CntResult easy = solve_cnt_gw(x, y, cfg, nullptr, 5);
    bool strictly_decreasing = true;
    for (std::size_t t = 1; t < easy.trace.rows.size(); ++t) {
      strictly_decreasing = strictly_decreasing && easy.trace.rows[t].objective < easy.trace.rows[t - 1].objective;
    }
    if (strictly_decreasing) CHECK(easy.trace.schedule.empty());
    for (std::size_t k = 1; k < easy.trace.schedule.size(); ++k) {
      CHECK(easy.trace.schedule[k].second == 2 * easy.trace.schedule[k - 1].second);
    }

    // adversarially low starting budget; anisotropic rotated copy so both runs share a basin
    Matrix shape = synthetic::separated_ball(rng, 40, 2, 0.1);
    shape.col(1) *= 0.5;
    const Matrix moved = synthetic::rotate_permute(shape, synthetic::random_rotation(rng, 2), synthetic::random_permutation(rng, 40));
    const EmbeddedMeasure u = test::embed_sq(normalize_radius(DiscreteMeasure(shape)));
    const EmbeddedMeasure v = test::embed_sq(normalize_radius(DiscreteMeasure(moved)));
    EgwConfig low;
    low.eps = 1e-2;
    low.outer_tol = 1e-8;
    const CntResult adaptive = solve_cnt_gw(u, v, low, nullptr, 1);
    EgwConfig ref = low;
    ref.inner = fixed_inner(500);
    ref.divergence_patience = 1000;
    const CntResult reference = solve_cnt_gw(u, v, ref);
    CHECK_FALSE(adaptive.trace.schedule.empty());
    CHECK(adaptive.objective == doctest::Approx(reference.objective).epsilon(1e-4));
  }

  TEST_CASE("multiscale solver") {
    test::Rng rng(67);
    const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 200, 2, true));
    const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 150, 2, true));
    EgwConfig cfg;
    cfg.eps = 1e-2;
    cfg.inner = threshold_inner(1e-8);
    const MultiscaleResult r = solve_multiscale(x, y, cfg, 0.1, 5);
    CHECK(r.coarse_src_weights.size() == 20);
    CHECK(r.coarse_tgt_weights.size() == 15);
    CHECK(r.coarse_src_weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.coarse_tgt_weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.src_labels.size() == 200);
    CHECK_THROWS_AS(solve_multiscale(x, y, cfg, 0.005, 5), InputError);
    CHECK_THROWS_AS(solve_multiscale(x, y, cfg, 1.0, 5), InputError);
  }

  TEST_CASE("multiscale with singleton clusters reduces to the plain solve") {
    test::Rng rng(68);
    const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 20, 2, true));
    const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 16, 2, true));
    EgwConfig cfg;
    cfg.eps = 1e-2;
    cfg.inner = threshold_inner(1e-11);
    cfg.outer_tol = 1e-10;
    const MultiscaleResult ms = solve_multiscale(x, y, cfg, 0.99, 1);
    CHECK(ms.coarse_src_weights.size() == 20);
    CHECK(ms.coarse_tgt_weights.size() == 16);
    const CntResult plain = solve_cnt_gw(x, y, cfg);
    CHECK(ms.coarse.objective == doctest::Approx(plain.objective).epsilon(1e-9));
    CHECK(ms.fine.objective == doctest::Approx(plain.objective).epsilon(1e-9));
  }

  TEST_CASE("solves are deterministic") {
    test::Rng rng(69);
    const EmbeddedMeasure x = test::embed_sq(test::cloud(rng, 80, 3, true));
    const EmbeddedMeasure y = test::embed_sq(test::cloud(rng, 70, 3, true));
    EgwConfig cfg;
    cfg.eps = 1e-2;
    cfg.inner = fixed_inner(200);
    cfg.init = RandomInit{11, 1.0};
    const CntResult r0 = solve_cnt_gw(x, y, cfg);
    const CntResult r1 = solve_cnt_gw(x, y, cfg);
    REQUIRE(r0.trace.rows.size() == r1.trace.rows.size());
    for (std::size_t t = 0; t < r0.trace.rows.size(); ++t) {
      CHECK(r0.trace.rows[t].objective == r1.trace.rows[t].objective);
      CHECK(r0.trace.rows[t].gamma_delta == r1.trace.rows[t].gamma_delta);
    }
    CHECK(r0.gamma == r1.gamma);
  }

  TEST_CASE("outer stopping rules") {
    EgwConfig cfg;
    cfg.outer_tol = 1e-5;
    cfg.max_outer = 50;

    // decrease below outer_tol stops
    Scripted plain({1.0, 0.5, 0.499999});
    const SolveTrace t0 = run_outer(plain, cfg);
    CHECK(t0.converged);
    CHECK(t0.rows.size() == 3);

    // five consecutive increases under a fixed budget abort
    Scripted rising({1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6});
    CHECK_THROWS_AS(run_outer(rising, cfg), SolverError);
    Scripted bumpy({1.0, 1.1, 1.2, 1.3, 1.4, 0.9, 1.0, 1.1, 1.2, 1.3, 0.8, 0.8});
    CHECK(run_outer(bumpy, cfg).converged);

    // thresholded inner solves: an increase below outer_tol is stationarity, a larger one continues
    EgwConfig thr = cfg;
    thr.inner.budget = ThresholdBudget{1e-6, 1000};
    Scripted noise({1.0, 0.5, 0.5 + 1e-9});
    const SolveTrace t1 = run_outer(noise, thr);
    CHECK(t1.converged);
    CHECK(t1.rows.size() == 3);
    Scripted jumps({1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.0, 1.0});
    CHECK(run_outer(jumps, thr).converged);

    // adaptive budgets double on every increase and stop at the cap
    Scripted adaptive({1.0, 1.1, 0.9, 1.0, 0.8, 0.8});
    const SolveTrace t2 = run_outer(adaptive, cfg, 5);
    REQUIRE(t2.schedule.size() == 2);
    CHECK(t2.schedule[0] == std::make_pair(1, 10));
    CHECK(t2.schedule[1] == std::make_pair(3, 20));
    CHECK(std::get<FixedBudget>(adaptive.budgets.back()).iterations == 20);
    Scripted capped({1.0, 2.0, 3.0, 4.0});
    CHECK_THROWS_AS(run_outer(capped, cfg, 5, 16), SolverError);

    // the optional Gamma rule stops first
    EgwConfig g = cfg;
    g.gamma_tol = 1.0;
    Scripted any({3.0, 2.0, 1.0});
    CHECK(run_outer(any, g).rows.size() == 1);
  }

  TEST_CASE("configuration validation") {
    EgwConfig cfg;
    cfg.eps = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg.eps = 1e-3;
    cfg.max_outer = 0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
  }
}
