#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "egw/embedding.hpp"
#include "egw/measures.hpp"
#include "egw/sinkhorn.hpp"

namespace egw {

/// The dual variable Gamma is a plain D x E matrix; its augmented form
/// block-diag(Gamma, 1) is never stored.
using GammaOperator = Matrix;

/// Gamma_0 = 0, i.e. the first pi-step starts from the product plan.
struct ProductInit {};
/// i.i.d. Gaussian entries times scale * sqrt(tr Sigma_a tr Sigma_b / (D E)).
struct RandomInit {
  std::uint64_t seed = 0;
  double scale = 1.0;
};
/// Explicit Gamma_0 (e.g. from landmarks).
struct GivenInit {
  Matrix gamma;
};
using GammaInit = std::variant<ProductInit, RandomInit, GivenInit>;

struct EgwConfig {
  double eps = 1e-3;
  /// Inner solver settings; its temperature is set by each solver.
  SinkhornConfig inner;
  double outer_tol = 1e-5;
  int max_outer = 200;
  GammaInit init = ProductInit{};
  /// Carry Sinkhorn potentials across outer steps.
  bool warm_start = true;
  /// Consecutive objective increases tolerated before giving up (fixed budget).
  int divergence_patience = 5;
  /// Adaptive inner schedule: start from this fixed budget and double it whenever
  /// the objective increases. Overridden by an explicit `adaptive_start` argument.
  std::optional<int> adaptive_start;
  /// Extra stop rule: ||Gamma_t - Gamma_{t+1}|| <= gamma_tol.
  std::optional<double> gamma_tol;
  /// When > 1, one last outer step runs with square-root annealing of the inner
  /// temperature, starting from final_anneal_factor times its target value.
  double final_anneal_factor = 0.0;
  /// Cap on N * M for the solvers that keep dense N x M matrices.
  Index dense_guard = 50'000'000;
  /// Called after every outer step with the dense coupling (forces densification).
  std::function<void(int, const Matrix&)> coupling_observer;

  void validate() const;
};

struct TraceRow {
  int step = 0;
  double objective = 0.0;    // GW_eps estimate after the step
  double gamma_delta = 0.0;  // ||Gamma_t - Gamma_{t+1}||
  double marginal_err = 0.0;
  int inner_iters = 0;
  double elapsed_s = 0.0;
  double dual_value = 0.0;   // D_eps(Gamma_t) = min_pi F(Gamma_t, pi)
};

struct SolveTrace {
  std::vector<TraceRow> rows;
  /// Doubling events of the adaptive wrapper: (step, new inner budget).
  std::vector<std::pair<int, int>> schedule;
  bool converged = false;
};

/// Result of one outer step as seen by the driver.
struct OuterStep {
  double objective = 0.0;
  double gamma_delta = 0.0;
  double marginal_err = 0.0;
  int inner_iters = 0;
  double dual_value = 0.0;
};

/// One alternate-minimization solver, advanced step by step by `run_outer`.
class OuterIteration {
 public:
  virtual ~OuterIteration() = default;
  /// Performs pi <- pi*(Gamma), Gamma <- Gamma*(pi) with the given inner budget.
  /// The inner temperature is chosen by the solver; `anneal_factor` > 1 turns on
  /// annealing from anneal_factor times that temperature.
  virtual OuterStep step(const SinkhornConfig& inner, double anneal_factor) = 0;
};

/// Drives an OuterIteration until the objective decrease falls below cfg.outer_tol.
/// With `adaptive_start` the inner budget starts there and doubles whenever the
/// objective increases (abort beyond `adaptive_cap`); otherwise a fixed budget is
/// used and `divergence_patience` consecutive increases abort the solve.
SolveTrace run_outer(OuterIteration& it, const EgwConfig& cfg, std::optional<int> adaptive_start = {},
                     int adaptive_cap = 1 << 14);

// ---- building blocks -------------------------------------------------------

/// One pass over an implicit plan: row/column sums, pi Y, pi t and KL(pi | a x b).
struct PlanMoments {
  Vector r;
  Vector q;
  Matrix py;
  Vector pt;
  double kl = 0.0;
};
PlanMoments plan_moments(const ImplicitCoupling& pi, const Matrix& y, const Vector& t);

/// Gamma*(pi) = X^T pi Y.
Matrix gamma_step(const Matrix& pi, const EmbeddedMeasure& src, const EmbeddedMeasure& tgt);
Matrix gamma_step(const ImplicitCoupling& pi, const EmbeddedMeasure& src, const EmbeddedMeasure& tgt);

/// Bilinear potentials: pi_ij = a_i b_j exp((f_i + g_j + 2 <X_i, Gamma Y_j> + 2 s_i t_j) / (eps/8)).
struct PiStepResult {
  ImplicitCoupling coupling;  // potentials with respect to |Xbar_i - Zbar_j|^2
  Vector f_bil;
  Vector g_bil;
  int iterations = 0;
  double marginal_error = 0.0;
};

/// pi*(Gamma): entropic OT at temperature eps/8 between the augmented source
/// features and the augmented target features mapped by Gamma.
PiStepResult pi_step(const Matrix& gamma, const EmbeddedMeasure& src, const EmbeddedMeasure& tgt,
                     double eps, const SinkhornConfig& inner, const WarmStart* warm_bilinear = nullptr);

/// C(alpha, beta) on centered embeddings.
double constant_C(const EmbeddedMeasure& src, const EmbeddedMeasure& tgt);

/// C + 8 F(Gamma, pi) with F = |Gamma|^2 + (eps/8) KL(pi) - 2 <Gamma_bar, sum pi_ij Xbar_i Ybar_j^T>.
double egw_objective(const Matrix& gamma, const Matrix& pi, const EmbeddedMeasure& src,
                     const EmbeddedMeasure& tgt, double eps);
double egw_objective(const Matrix& gamma, const ImplicitCoupling& pi, const EmbeddedMeasure& src,
                     const EmbeddedMeasure& tgt, double eps);

/// D_eps(Gamma) = min_pi F(Gamma, pi), with the inner problem solved by `inner`.
double dual_objective(const Matrix& gamma, const EmbeddedMeasure& src, const EmbeddedMeasure& tgt,
                      double eps, const SinkhornConfig& inner);

Matrix initial_gamma(const GammaInit& init, const EmbeddedMeasure& src, const EmbeddedMeasure& tgt);

/// Gamma_0 = sum_k X_{i_k} Y_{j_k}^T from landmark index pairs.
Matrix landmark_gamma(const std::vector<std::pair<Index, Index>>& pairs, const EmbeddedMeasure& src,
                      const EmbeddedMeasure& tgt);

// ---- solvers ---------------------------------------------------------------

struct CntResult {
  Matrix gamma;
  ImplicitCoupling coupling;
  Vector f_bil;
  Vector g_bil;
  SolveTrace trace;
  double objective = 0.0;  // GW_eps estimate at the last step
  double constant = 0.0;
};

/// Alternate minimization on embedded measures. `warm_bilinear` seeds the first
/// pi-step (used by the multiscale solver).
CntResult solve_cnt_gw(const EmbeddedMeasure& src, const EmbeddedMeasure& tgt, const EgwConfig& cfg,
                       const WarmStart* warm_bilinear = nullptr, std::optional<int> adaptive_start = {});

struct DenseResult {
  DenseCoupling coupling;
  SolveTrace trace;
  double objective = 0.0;
};

/// Initial plan for the cost-matrix solvers: the product plan, or any N x M matrix W
/// standing for Gamma_0 = X^T W Y.
using PlanInit = std::optional<Matrix>;

/// Exact kernel-trick solver on cost matrices, Sinkhorn at temperature eps on
/// C = -4 diag(K_X) diag(K_Y)^T - 16 K_X pi K_Y.
DenseResult solve_kernel_gw(const Matrix& src_cost, const Matrix& tgt_cost, const Vector& a,
                            const Vector& b, const EgwConfig& cfg, const PlanInit& init = {},
                            std::optional<int> adaptive_start = {});

/// Classical entropic GW: Sinkhorn at temperature eps on C = -4 c_X pi c_Y.
DenseResult solve_entropic_gw_baseline(const Matrix& src_cost, const Matrix& tgt_cost,
                                       const Vector& a, const Vector& b, const EgwConfig& cfg,
                                       const PlanInit& init = {},
                                       std::optional<int> adaptive_start = {});

struct MultiscaleResult {
  CntResult coarse;
  CntResult fine;
  std::vector<Index> src_labels;
  std::vector<Index> tgt_labels;
  Vector coarse_src_weights;
  Vector coarse_tgt_weights;
};

/// K-means coarsening with ceil(rho N) / ceil(rho M) clusters, coarse solve,
/// cluster-constant potential upsampling, fine solve from the coarse Gamma.
MultiscaleResult solve_multiscale(const EmbeddedMeasure& src, const EmbeddedMeasure& tgt,
                                  const EgwConfig& cfg, double rho, std::uint64_t seed,
                                  std::optional<int> adaptive_start = {});

/// Coarse stage alone (also used by the landscape exploration).
struct CoarseProblem {
  EmbeddedMeasure src;
  EmbeddedMeasure tgt;
  std::vector<Index> src_labels;
  std::vector<Index> tgt_labels;
};
CoarseProblem coarsen(const EmbeddedMeasure& src, const EmbeddedMeasure& tgt, double rho,
                      std::uint64_t seed);

/// GW loss of any plan from the two cost matrices in O(N^2 M + N M^2):
/// sum c_X^2 mu mu + sum c_Y^2 nu nu - 2 sum pi (c_X pi c_Y), mu/nu the plan marginals.
double gw_loss(const Matrix& pi, const Matrix& src_cost, const Matrix& tgt_cost);

}  // namespace egw
