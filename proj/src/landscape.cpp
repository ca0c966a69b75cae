#include "egw/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SVD>

namespace egw {

std::vector<int> single_linkage(const std::vector<Matrix>& items, double tol) {
  const int n = static_cast<int>(items.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if ((items[i] - items[j]).norm() <= tol) {
        const int ri = find(i);
        const int rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }
  std::vector<int> label(n, -1);
  std::vector<int> root_label(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (root_label[r] < 0) root_label[r] = next++;
    label[i] = root_label[r];
  }
  return label;
}

namespace {

double median_norm(const std::vector<Matrix>& items) {
  std::vector<double> norms;
  for (const auto& m : items) norms.push_back(m.norm());
  if (norms.empty()) return 0.0;
  std::sort(norms.begin(), norms.end());
  const size_t k = norms.size();
  return k % 2 ? norms[k / 2] : 0.5 * (norms[k / 2 - 1] + norms[k / 2]);
}

double default_tol(const std::vector<Matrix>& items) {
  const double med = median_norm(items);
  return med > 0.0 ? 1e-2 * med : 1e-12;
}

Eigen::VectorXd flatten(const Matrix& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

}  // namespace

LandscapeReport explore(const EmbeddedMeasure& src, const EmbeddedMeasure& tgt, const EgwConfig& cfg,
                        const LandscapeConfig& lcfg) {
  if (lcfg.n_seeds < 1) throw InputError("landscape exploration needs at least one seed");
  if (lcfg.dedup_tol && !(*lcfg.dedup_tol > 0.0)) throw InputError("dedup tolerance must be positive");
  LandscapeReport report;
  report.n_seeds = lcfg.n_seeds;

  const CoarseProblem coarse = coarsen(src, tgt, lcfg.rho, lcfg.seed);

  // coarse phase: one solve per seed
  std::vector<Matrix> coarse_min;
  for (int s = 0; s < lcfg.n_seeds; ++s) {
    EgwConfig c = cfg;
    c.init = RandomInit{lcfg.seed + 1000003ull * static_cast<std::uint64_t>(s + 1), lcfg.init_scale};
    try {
      coarse_min.push_back(solve_cnt_gw(coarse.src, coarse.tgt, c).gamma);
    } catch (const Error& e) {
      ++report.failures;
      report.failure_messages.push_back("seed " + std::to_string(s) + ": " + e.what());
    }
  }
  if (coarse_min.empty()) return report;

  const double coarse_tol = lcfg.dedup_tol.value_or(default_tol(coarse_min));
  const std::vector<int> coarse_label = single_linkage(coarse_min, coarse_tol);
  const int n_coarse = *std::max_element(coarse_label.begin(), coarse_label.end()) + 1;
  std::vector<int> coarse_count(n_coarse, 0);
  std::vector<int> representative(n_coarse, -1);
  for (size_t i = 0; i < coarse_label.size(); ++i) {
    ++coarse_count[coarse_label[i]];
    if (representative[coarse_label[i]] < 0) representative[coarse_label[i]] = static_cast<int>(i);
  }

  // refine one representative per coarse cluster at full resolution
  std::vector<Matrix> fine;
  std::vector<double> fine_obj;
  std::vector<double> fine_grad;
  std::vector<int> fine_count;
  for (int c = 0; c < n_coarse; ++c) {
    EgwConfig f = cfg;
    f.init = GivenInit{coarse_min[representative[c]]};
    const double gnorm = coarse_min[representative[c]].norm();
    const double grad_tol = lcfg.grad_tol.value_or(1e-4 * std::max(gnorm, 1e-12));
    f.gamma_tol = 0.5 * grad_tol;
    f.outer_tol = std::min(cfg.outer_tol, 1e-12);  // let the gradient rule decide
    try {
      CntResult r = solve_cnt_gw(src, tgt, f);
      // |grad D(Gamma)| = 2 |Gamma - Gamma*(pi*(Gamma))| at the returned Gamma
      const WarmStart warm{r.f_bil, r.g_bil};
      const PiStepResult ps = pi_step(r.gamma, src, tgt, cfg.eps, cfg.inner, &warm);
      fine_grad.push_back(2.0 * (gamma_step(ps.coupling, src, tgt) - r.gamma).norm());
      fine.push_back(std::move(r.gamma));
      fine_obj.push_back(r.objective);
      fine_count.push_back(coarse_count[c]);
    } catch (const Error& e) {
      report.failures += coarse_count[c];
      report.failure_messages.push_back("refinement " + std::to_string(c) + ": " + e.what());
    }
  }
  if (fine.empty()) return report;

  report.dedup_tol = lcfg.dedup_tol.value_or(default_tol(fine));
  const std::vector<int> label = single_linkage(fine, report.dedup_tol);
  const int k = *std::max_element(label.begin(), label.end()) + 1;
  report.minima.resize(k);
  std::vector<bool> seen(k, false);
  for (size_t i = 0; i < fine.size(); ++i) {
    LocalMinimum& m = report.minima[label[i]];
    m.basin_count += fine_count[i];
    // keep the lowest objective as the representative of a merged cluster
    if (!seen[label[i]] || fine_obj[i] < m.objective) {
      m.gamma = fine[i];
      m.objective = fine_obj[i];
      m.grad_norm = fine_grad[i];
      seen[label[i]] = true;
    }
  }
  std::stable_sort(report.minima.begin(), report.minima.end(),
                   [](const LocalMinimum& a, const LocalMinimum& b) {
                     if (a.basin_count != b.basin_count) return a.basin_count > b.basin_count;
                     return a.objective < b.objective;
                   });

  // PCA of the flattened minima weighted by basin size
  const Index de = src.dim() * tgt.dim();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(de);
  double wsum = 0.0;
  for (const auto& m : report.minima) {
    mean += m.basin_count * flatten(m.gamma);
    wsum += m.basin_count;
  }
  mean /= wsum;
  Eigen::MatrixXd data(k, de);
  for (int i = 0; i < k; ++i) {
    data.row(i) = std::sqrt(report.minima[i].basin_count / wsum) *
                  (flatten(report.minima[i].gamma) - mean).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeFullV);
  Eigen::MatrixXd v = svd.matrixV();
  const Index ncomp = std::min<Index>(2, de);
  Eigen::MatrixXd basis = v.leftCols(ncomp);
  for (Index c = 0; c < ncomp; ++c) {
    Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0.0) basis.col(c) *= -1.0;
  }
  report.loadings = basis.transpose();
  report.coords.resize(k, ncomp);
  for (int i = 0; i < k; ++i) {
    report.coords.row(i) = (basis.transpose() * (flatten(report.minima[i].gamma) - mean)).transpose();
  }
  return report;
}

Matrix objective_grid(const EmbeddedMeasure& src, const EmbeddedMeasure& tgt, const EgwConfig& cfg,
                      const Matrix& center, const Matrix& dir1, const Matrix& dir2,
                      const std::vector<double>& u, const std::vector<double>& v) {
  if (dir1.rows() != center.rows() || dir1.cols() != center.cols() || dir2.rows() != center.rows() ||
      dir2.cols() != center.cols()) {
    throw InputError("grid directions must have the shape of Gamma");
  }
  const double n1 = dir1.norm();
  const double n2 = dir2.norm();
  const double dot = (dir1.array() * dir2.array()).sum();
  if (std::abs(n1 - 1.0) > 1e-9 || std::abs(n2 - 1.0) > 1e-9 || std::abs(dot) > 1e-9) {
    throw InputError("grid directions must be orthonormal");
  }
  SinkhornConfig inner = cfg.inner;
  if (std::holds_alternative<FixedBudget>(inner.budget)) inner.budget = ThresholdBudget{1e-9, 100000};
  const double c = constant_C(src, tgt);
  Matrix out(u.size(), v.size());
  for (size_t k = 0; k < u.size(); ++k) {
    for (size_t l = 0; l < v.size(); ++l) {
      const Matrix g = center + u[k] * dir1 + v[l] * dir2;
      out(k, l) = c + 8.0 * dual_objective(g, src, tgt, cfg.eps, inner);
    }
  }
  return out;
}

}  // namespace egw
