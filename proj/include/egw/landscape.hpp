#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "egw/solvers.hpp"

namespace egw {

struct LocalMinimum {
  Matrix gamma;
  double objective = 0.0;
  int basin_count = 0;
  double grad_norm = 0.0;  // 2 |Gamma - Gamma*(pi*(Gamma))|
};

struct LandscapeReport {
  std::vector<LocalMinimum> minima;  // sorted by decreasing basin size
  Matrix loadings;                   // 2 x (D E), orthonormal rows
  Matrix coords;                     // one 2D point per minimum
  int n_seeds = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
  double dedup_tol = 0.0;
};

struct LandscapeConfig {
  int n_seeds = 50;
  std::optional<double> dedup_tol;  // default 1e-2 x median |Gamma| of the minima
  double rho = 0.1;                 // coarse phase ratio
  std::uint64_t seed = 0;
  double init_scale = 1.0;          // RandomInit scale
  std::optional<double> grad_tol;   // default 1e-4 |Gamma|, per minimum
};

/// Random Gamma_0 per seed, coarse solve, deduplication, fine refinement,
/// deduplication again, basin counts and a weighted PCA of the minima.
LandscapeReport explore(const EmbeddedMeasure& src, const EmbeddedMeasure& tgt, const EgwConfig& cfg,
                        const LandscapeConfig& lcfg);

/// Single-linkage clusters of the matrices at Frobenius distance <= tol;
/// returns a cluster index per input, clusters numbered by first appearance.
std::vector<int> single_linkage(const std::vector<Matrix>& items, double tol);

/// C + 8 D_eps(center + u_k dir1 + v_l dir2) for every grid point (k, l); the inner
/// problems are solved to the marginal threshold in `cfg.inner` (forced if fixed).
Matrix objective_grid(const EmbeddedMeasure& src, const EmbeddedMeasure& tgt, const EgwConfig& cfg,
                      const Matrix& center, const Matrix& dir1, const Matrix& dir2,
                      const std::vector<double>& u, const std::vector<double>& v);

}  // namespace egw
