#include "egw/divergence.hpp"

#include <cmath>
#include <sstream>

namespace egw {

double gw_loss_bruteforce(const Matrix& pi, const Matrix& src_cost, const Matrix& tgt_cost,
                          double max_pairs) {
  const Index n = pi.rows();
  const Index m = pi.cols();
  if (src_cost.rows() != n || src_cost.cols() != n || tgt_cost.rows() != m || tgt_cost.cols() != m) {
    throw InputError("gw_loss_bruteforce: dimension mismatch");
  }
  if (static_cast<double>(n) * static_cast<double>(m) > max_pairs) {
    std::ostringstream os;
    os << "gw_loss_bruteforce: " << n << "x" << m << " exceeds the brute-force budget";
    throw InputError(os.str());
  }
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (pi(i, j) == 0.0) continue;
      double inner = 0.0;
      for (Index k = 0; k < n; ++k) {
        for (Index l = 0; l < m; ++l) {
          const double d = src_cost(i, k) - tgt_cost(j, l);
          inner += d * d * pi(k, l);
        }
      }
      total += pi(i, j) * inner;
    }
  }
  return total;
}

GwValueReport gw_value(const Matrix& gamma, const ImplicitCoupling& pi, const EmbeddedMeasure& src,
                       const EmbeddedMeasure& tgt, double eps) {
  const PlanMoments mom = plan_moments(pi, tgt.features(), tgt.half_sq_norms());
  const Matrix m = src.features().transpose() * mom.py;
  GwValueReport r;
  r.constant = constant_C(src, tgt);
  r.gamma_sq = gamma.squaredNorm();
  r.kl_term = eps / 8.0 * mom.kl;
  r.cross_term = (gamma.array() * m.array()).sum() + src.half_sq_norms().dot(mom.pt);
  r.gw_eps = r.constant + 8.0 * (r.gamma_sq + r.kl_term - 2.0 * r.cross_term);
  return r;
}

CntResult solve_self(const EmbeddedMeasure& alpha, const EgwConfig& cfg) {
  EgwConfig self = cfg;
  const Matrix& x = alpha.features();
  self.init = GivenInit{Matrix(x.transpose() * alpha.weights().asDiagonal() * x)};
  return solve_cnt_gw(alpha, alpha, self);
}

namespace {

bool same_measure(const EmbeddedMeasure& a, const EmbeddedMeasure& b) {
  return a.size() == b.size() && a.dim() == b.dim() && a.features() == b.features() &&
         a.weights() == b.weights();
}

}  // namespace

GwValueReport sgw(const EmbeddedMeasure& a, const EmbeddedMeasure& b, const EgwConfig& cfg) {
  const CntResult aa = solve_self(a, cfg);
  GwValueReport report;
  if (same_measure(a, b)) {
    report = gw_value(aa.gamma, aa.coupling, a, a, cfg.eps);
    report.gw_eps = aa.objective;
    report.gw_aa = report.gw_bb = aa.objective;
  } else {
    const CntResult bb = solve_self(b, cfg);
    const CntResult ab = solve_cnt_gw(a, b, cfg);
    report = gw_value(ab.gamma, ab.coupling, a, b, cfg.eps);
    report.gw_eps = ab.objective;
    report.gw_aa = aa.objective;
    report.gw_bb = bb.objective;
  }
  report.sgw = report.gw_eps - 0.5 * (report.gw_aa + report.gw_bb);
  report.separability_warning = separability_warning(a, cfg.eps) || separability_warning(b, cfg.eps);
  return report;
}

FeatureGradient feature_gradient(const Matrix& gamma, const ImplicitCoupling& pi,
                                 const EmbeddedMeasure& src, const EmbeddedMeasure& tgt) {
  const Matrix& x = src.features();
  const Matrix& y = tgt.features();
  const Vector& a = src.weights();
  const Vector& b = tgt.weights();
  const Vector sx = x.rowwise().squaredNorm();
  const Vector sy = y.rowwise().squaredNorm();
  const double m2a = a.dot(sx);
  const double m2b = b.dot(sy);

  // derivative of the constant, sum a a |x - x'|^4 - 2 m2a m2b on centered features
  auto constant_part = [](const Matrix& f, const Vector& w, const Vector& sq, double m2,
                          double m2_other) {
    const Eigen::RowVectorXd mu3 = (w.asDiagonal() * sq).transpose() * f;
    const Eigen::MatrixXd cov = f.transpose() * w.asDiagonal() * f;
    Matrix g(f.rows(), f.cols());
    for (Index i = 0; i < f.rows(); ++i) {
      g.row(i) = 8.0 * w[i] *
                 ((sq[i] + m2 - m2_other) * f.row(i) - mu3 + 2.0 * f.row(i) * cov);
    }
    return g;
  };

  // plan moments in both directions
  const PlanMoments mom = plan_moments(pi, y, tgt.half_sq_norms());
  const DenseCoupling dense = densify(pi);
  const Matrix ptx = dense.pi.transpose() * x;              // M x D
  const Vector ptsx = dense.pi.transpose() * sx;            // M

  FeatureGradient out;
  out.src = constant_part(x, a, sx, m2a, m2b);
  out.tgt = constant_part(y, b, sy, m2b, m2a);
  for (Index i = 0; i < x.rows(); ++i) {
    const double row_y2 = 2.0 * mom.pt[i];  // sum_j pi_ij |Y_j|^2
    out.src.row(i) -= 16.0 * (gamma * mom.py.row(i).transpose()).transpose() + 8.0 * row_y2 * x.row(i);
  }
  for (Index j = 0; j < y.rows(); ++j) {
    out.tgt.row(j) -= 16.0 * (gamma.transpose() * ptx.row(j).transpose()).transpose() +
                      8.0 * ptsx[j] * y.row(j);
  }
  return out;
}

EmbeddedMeasure MeasuredSpace::embed() const { return embed_measure(measure, cost, dim); }

Matrix ambient_gradient(const MeasuredSpace& space, const EmbeddedMeasure& emb, const Matrix& grad,
                        bool& approximate) {
  const Vector& a = space.measure.weights();
  const Index n = space.measure.size();
  if (space.cost.is_squared_distance()) {
    // features are the centered points, possibly rotated onto principal axes
    Matrix g = grad;
    if (emb.dim() != space.measure.dim()) {
      // features = centered points times an orthonormal basis U: chain through U^T
      const Matrix& x = emb.features();
      const Matrix centered = space.measure.points().rowwise() - space.measure.centroid();
      const Eigen::MatrixXd u =
          centered.colPivHouseholderQr().solve(Eigen::MatrixXd(x));  // dim x D
      g = grad * u.transpose();
    }
    const Eigen::RowVectorXd total = g.colwise().sum();
    for (Index i = 0; i < n; ++i) g.row(i) -= a[i] * total;
    return g;
  }
  if (!space.cost.differentiable()) {
    throw InputError("cost '" + space.cost.to_string() + "' is not differentiable in the positions");
  }
  if (!emb.basis) throw InputError("embedding carries no kernel basis for the chain rule");
  approximate = true;
  const KernelBasis& basis = *emb.basis;
  const Matrix& pts = basis.points;
  const Index dim = pts.cols();
  const Index d = basis.values.size();
  Matrix out = Matrix::Zero(n, dim);
  std::vector<double> gc(dim);
#pragma omp parallel for schedule(static) firstprivate(gc)
  for (Index m = 0; m < n; ++m) {
    // grad_x k~(x, x_i) = -1/2 grad c(x, x_i) + 1/2 sum_k a_k grad c(x, x_k)
    Matrix dk(n, dim);
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(dim);
    for (Index i = 0; i < n; ++i) {
      cost_gradient(basis.spec, pts.row(m).data(), pts.row(i).data(), dim, gc.data());
      for (Index k = 0; k < dim; ++k) dk(i, k) = gc[k];
      mean += a[i] * dk.row(i);
    }
    dk = (-0.5 * dk).rowwise() + 0.5 * mean;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(dim);
    for (Index c = 0; c < d; ++c) {
      if (basis.values[c] <= 0.0) continue;
      const Eigen::RowVectorXd dproj = basis.vectors.col(c).transpose() * dk / std::sqrt(basis.values[c]);
      acc += grad(m, c) * dproj;
    }
    out.row(m) = acc;
  }
  return out;
}

PositionGradient egw_gradient(const MeasuredSpace& src, const MeasuredSpace& tgt,
                              const EgwConfig& cfg, Side side) {
  const EmbeddedMeasure es = src.embed();
  const EmbeddedMeasure et = tgt.embed();
  const CntResult res = solve_cnt_gw(es, et, cfg);
  const FeatureGradient fg = feature_gradient(res.gamma, res.coupling, es, et);
  PositionGradient out;
  out.value = res.objective;
  if (side != Side::Target) out.src = ambient_gradient(src, es, fg.src, out.approximate);
  if (side != Side::Source) out.tgt = ambient_gradient(tgt, et, fg.tgt, out.approximate);
  return out;
}

namespace {

struct SgwState {
  double value = 0.0;
  Matrix grad;
  bool approximate = false;
  Matrix cross_gamma;
};

// SGW(moving, target) and its gradient in the moving positions. The cross term
// may be warm-started from a previous Gamma.
SgwState sgw_with_gradient(const MeasuredSpace& src, const MeasuredSpace& tgt, const EgwConfig& cfg,
                           const Matrix* warm_gamma) {
  const EmbeddedMeasure es = src.embed();
  const EmbeddedMeasure et = tgt.embed();
  SgwState out;

  const CntResult aa = solve_self(es, cfg);
  const FeatureGradient faa = feature_gradient(aa.gamma, aa.coupling, es, es);
  if (same_measure(es, et)) {
    // all three solves coincide: SGW = 0 and the gradient cancels exactly
    out.value = 0.0;
    out.grad = Matrix::Zero(src.measure.size(), src.measure.dim());
    out.cross_gamma = aa.gamma;
    return out;
  }
  const CntResult bb = solve_self(et, cfg);
  EgwConfig cross_cfg = cfg;
  if (warm_gamma && warm_gamma->rows() == es.dim() && warm_gamma->cols() == et.dim()) {
    cross_cfg.init = GivenInit{*warm_gamma};
  }
  const CntResult ab = solve_cnt_gw(es, et, cross_cfg);
  const FeatureGradient fab = feature_gradient(ab.gamma, ab.coupling, es, et);
  out.value = ab.objective - 0.5 * (aa.objective + bb.objective);
  // d/dx [GW(x, y) - GW(x, x) / 2]; x enters both slots of the self term
  const Matrix feat = fab.src - 0.5 * (faa.src + faa.tgt);
  out.grad = ambient_gradient(src, es, feat, out.approximate);
  out.cross_gamma = ab.gamma;
  return out;
}

}  // namespace

PositionGradient sgw_gradient(const MeasuredSpace& src, const MeasuredSpace& tgt,
                              const EgwConfig& cfg) {
  const SgwState s = sgw_with_gradient(src, tgt, cfg, nullptr);
  PositionGradient out;
  out.src = s.grad;
  out.value = s.value;
  out.approximate = s.approximate;
  return out;
}

std::vector<FlowStep> gradient_flow(const MeasuredSpace& moving, const std::vector<FlowTarget>& targets,
                                    const EgwConfig& cfg, int steps, double step_size) {
  if (targets.empty()) throw InputError("gradient flow needs at least one target");
  for (const auto& t : targets) {
    if (!(t.weight >= 0.0)) throw InputError("flow target weights must be non-negative");
  }
  if (steps < 0) throw InputError("number of flow steps must be non-negative");
  MeasuredSpace current = moving;
  const Vector& a = moving.measure.weights();
  std::vector<Matrix> warm(targets.size());
  std::vector<FlowStep> out;
  for (int s = 0; s < steps; ++s) {
    Matrix grad = Matrix::Zero(current.measure.size(), current.measure.dim());
    double objective = 0.0;
    for (size_t k = 0; k < targets.size(); ++k) {
      if (targets[k].weight == 0.0) continue;
      const bool reuse = current.cost.is_squared_distance() && warm[k].size() > 0;
      SgwState st = sgw_with_gradient(current, targets[k].space, cfg, reuse ? &warm[k] : nullptr);
      objective += targets[k].weight * st.value;
      grad += targets[k].weight * st.grad;
      warm[k] = std::move(st.cross_gamma);
    }
    Matrix next = current.measure.points();
    for (Index i = 0; i < next.rows(); ++i) next.row(i) -= step_size / a[i] * grad.row(i);
    if (!next.allFinite()) {
      throw SolverError("gradient flow produced non-finite positions at step " + std::to_string(s));
    }
    current.measure = DiscreteMeasure(next, a);
    out.push_back(FlowStep{s, objective, std::move(next)});
  }
  return out;
}

}  // namespace egw
