#pragma once

#include <memory>
#include <optional>
#include <variant>

#include "egw/cost_provider.hpp"
#include "egw/measures.hpp"

namespace egw {

enum class SinkhornMode {
  Standard,     // f <- S_b(g), then g <- S_a(f)
  Symmetrized,  // f <- (f + S_b(g)) / 2 and g <- (g + S_a(f)) / 2 from the same pair
};

struct FixedBudget {
  int iterations = 100;
};

/// Stop once both L1 marginal errors are below `tol`, or after `max_iterations`.
struct ThresholdBudget {
  double tol = 1e-3;
  int max_iterations = 100000;
};

struct SinkhornConfig {
  double eps = 1.0;  // effective temperature of the EOT problem
  SinkhornMode mode = SinkhornMode::Symmetrized;
  std::variant<FixedBudget, ThresholdBudget> budget = FixedBudget{};
  /// Square-root annealing eps_n = max(eps0 / sqrt(n), eps) when set.
  std::optional<double> anneal_eps0;
  /// Use the serial reference kernels instead of the OpenMP ones.
  bool reference_kernels = false;
  /// Costs with at most this many entries are materialized once per call.
  Index materialize_limit = Index(1) << 22;

  void validate() const;
};

struct WarmStart {
  Vector f;
  Vector g;
};

struct SinkhornResult {
  ImplicitCoupling coupling;
  int iterations = 0;
  double marginal_error = 0.0;  // ||pi 1 - a||_1 + ||pi^T 1 - b||_1 at the returned potentials
};

SinkhornResult sinkhorn(const Vector& a, const Vector& b,
                        const std::shared_ptr<const CostProvider>& cost,
                        const SinkhornConfig& cfg, const WarmStart* warm = nullptr);

inline SinkhornResult sinkhorn(const DiscreteMeasure& alpha, const DiscreteMeasure& beta,
                               const std::shared_ptr<const CostProvider>& cost,
                               const SinkhornConfig& cfg, const WarmStart* warm = nullptr) {
  return sinkhorn(alpha.weights(), beta.weights(), cost, cfg, warm);
}

/// sum_ij c_ij pi_ij + eps KL(pi | a x b).
double eot_primal_value(const Matrix& pi, const Matrix& cost, const Vector& a, const Vector& b,
                        double eps);

}  // namespace egw
