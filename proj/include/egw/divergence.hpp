#pragma once

#include <optional>
#include <vector>

#include "egw/cost.hpp"
#include "egw/embedding.hpp"
#include "egw/solvers.hpp"

namespace egw {

/// Direct quartic sum  sum_ijkl (cX_ik - cY_jl)^2 pi_ij pi_kl.  Refuses N * M > max_pairs.
double gw_loss_bruteforce(const Matrix& pi, const Matrix& src_cost, const Matrix& tgt_cost,
                          double max_pairs = 1e6);

struct GwValueReport {
  double gw_eps = 0.0;    // C + 8 F
  double constant = 0.0;  // C(alpha, beta)
  // F = gamma_sq + kl_term - 2 cross_term
  double gamma_sq = 0.0;
  double kl_term = 0.0;   // (eps / 8) KL(pi | a x b)
  double cross_term = 0.0;
  std::optional<double> sgw;
  double gw_aa = 0.0;
  double gw_bb = 0.0;
  /// eps log(1/eps) exceeds the squared smallest covariance eigenvalue of either measure.
  bool separability_warning = false;
};

/// Components of C + 8 F at a given (Gamma, pi).
GwValueReport gw_value(const Matrix& gamma, const ImplicitCoupling& pi, const EmbeddedMeasure& src,
                       const EmbeddedMeasure& tgt, double eps);

/// Self-matching solve GW_eps(alpha, alpha), started from the identity coupling
/// (Gamma_0 = Sigma_alpha).
CntResult solve_self(const EmbeddedMeasure& alpha, const EgwConfig& cfg);

/// SGW = GW(a, b) - (GW(a, a) + GW(b, b)) / 2. The cross term uses cfg.init.
GwValueReport sgw(const EmbeddedMeasure& a, const EmbeddedMeasure& b, const EgwConfig& cfg);

/// Gradients of C + 8 F with respect to the (centered) features at a fixed (Gamma, pi).
struct FeatureGradient {
  Matrix src;  // N x D
  Matrix tgt;  // M x E
};
FeatureGradient feature_gradient(const Matrix& gamma, const ImplicitCoupling& pi,
                                 const EmbeddedMeasure& src, const EmbeddedMeasure& tgt);

/// A measure together with the cost and embedding dimension used to embed it.
struct MeasuredSpace {
  DiscreteMeasure measure;
  CostSpec cost;
  Index dim = 20;

  EmbeddedMeasure embed() const;
};

enum class Side { Source, Target, Both };

struct PositionGradient {
  Matrix src;  // empty when not requested
  Matrix tgt;
  double value = 0.0;  // GW_eps (or SGW) at the solved state
  bool approximate = false;  // kernel-projection chain rule was used
};

/// Maps feature gradients back to ambient coordinates: exact for squared
/// Euclidean costs, kernel-projection approximation for the other smooth costs.
Matrix ambient_gradient(const MeasuredSpace& space, const EmbeddedMeasure& emb, const Matrix& grad,
                        bool& approximate);

/// Envelope-theorem gradient of GW_eps(src, tgt) with respect to point positions.
PositionGradient egw_gradient(const MeasuredSpace& src, const MeasuredSpace& tgt,
                              const EgwConfig& cfg, Side side);

/// Gradient of SGW(src, tgt) with respect to the source positions.
PositionGradient sgw_gradient(const MeasuredSpace& src, const MeasuredSpace& tgt,
                              const EgwConfig& cfg);

struct FlowTarget {
  MeasuredSpace space;
  double weight = 1.0;
};

struct FlowStep {
  int step = 0;
  double objective = 0.0;  // sum_k lambda_k SGW(moving, target_k) before the move
  Matrix points;           // positions after the move
};

/// Fixed-step descent of sum_k lambda_k SGW(moving, target_k) over the positions
/// of `moving`; each point moves by step_size * grad_i / a_i.
std::vector<FlowStep> gradient_flow(const MeasuredSpace& moving, const std::vector<FlowTarget>& targets,
                                    const EgwConfig& cfg, int steps, double step_size);

}  // namespace egw
