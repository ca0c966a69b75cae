#include "egw/sinkhorn.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "egw/parallel/softmin.hpp"

namespace egw {

void SinkhornConfig::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InputError("Sinkhorn temperature must be positive");
  if (const auto* fixed = std::get_if<FixedBudget>(&budget)) {
    if (fixed->iterations < 1) throw InputError("Sinkhorn iteration budget must be at least 1");
  } else {
    const auto& th = std::get<ThresholdBudget>(budget);
    if (!(th.tol > 0.0)) throw InputError("Sinkhorn marginal threshold must be positive");
    if (th.max_iterations < 1) throw InputError("Sinkhorn iteration cap must be at least 1");
  }
  if (anneal_eps0 && *anneal_eps0 < eps) {
    throw InputError("annealing start temperature must be at least the target temperature");
  }
}

namespace {

// Softmin sweeps over the rows (f-update) or the columns (g-update) of a cost.
class SoftminSweeps {
 public:
  SoftminSweeps(const std::shared_ptr<const CostProvider>& cost, const Vector& a, const Vector& b,
                const SinkhornConfig& cfg)
      : provider_(cost), log_a_(a.array().log()), log_b_(b.array().log()),
        serial_(cfg.reference_kernels) {
    if (cost->rows() * cost->cols() <= cfg.materialize_limit) dense_ = materialize(cost);
  }

  // out_i = -eps log sum_j b_j exp((g_j - c_ij) / eps)
  void rows(const Vector& g, double eps, Vector& out) const {
    sweep(g, log_b_, eps, out, false);
  }
  // out_j = -eps log sum_i a_i exp((f_i - c_ij) / eps)
  void cols(const Vector& f, double eps, Vector& out) const {
    sweep(f, log_a_, eps, out, true);
  }

 private:
  void sweep(const Vector& pot, const Vector& log_w, double eps, Vector& out, bool transposed) const {
    const Vector h = log_w + pot / eps;
    if (dense_) {
      const Matrix& c = transposed ? dense_->transposed() : dense_->matrix();
      if (serial_) {
        serial::softmin_rows(c, h, eps, out);
      } else {
        parallel::softmin_rows(c, h, eps, out);
      }
      return;
    }
    const Index n = transposed ? provider_->cols() : provider_->rows();
    const Index m = h.size();
    out.resize(n);
#pragma omp parallel if (!serial_)
    {
      std::vector<double> buf(m);
      std::span<double> span(buf.data(), buf.size());
#pragma omp for schedule(static)
      for (Index i = 0; i < n; ++i) {
        if (transposed) {
          provider_->col(i, span);
        } else {
          provider_->row(i, span);
        }
        out[i] = serial_ ? serial::softmin_row(buf.data(), h.data(), m, eps)
                         : parallel::softmin_row(buf.data(), h.data(), m, eps);
      }
    }
  }

  std::shared_ptr<const CostProvider> provider_;
  std::shared_ptr<const DenseCost> dense_;
  Vector log_a_;
  Vector log_b_;
  bool serial_;
};

// L1 distance between w and the marginal w_i exp((pot_i - s_i) / eps).
double marginal_gap(const Vector& w, const Vector& pot, const Vector& s, double eps) {
  double err = 0.0;
  for (Index i = 0; i < w.size(); ++i) err += std::abs(w[i] * std::expm1((pot[i] - s[i]) / eps));
  return err;
}

void check_finite(const Vector& f, const Vector& g, int iteration) {
  if (f.allFinite() && g.allFinite()) return;
  std::ostringstream os;
  os << "Sinkhorn potentials became non-finite at iteration " << iteration;
  throw SolverError(os.str());
}

}  // namespace

SinkhornResult sinkhorn(const Vector& a, const Vector& b,
                        const std::shared_ptr<const CostProvider>& cost,
                        const SinkhornConfig& cfg, const WarmStart* warm) {
  cfg.validate();
  if (cost->rows() != a.size() || cost->cols() != b.size()) {
    throw InputError("cost dimensions do not match the measures");
  }
  const Index n = a.size();
  const Index m = b.size();
  const SoftminSweeps sweeps(cost, a, b, cfg);

  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(m);
  if (warm) {
    if (warm->f.size() != n || warm->g.size() != m) {
      throw InputError("warm-start potentials have the wrong size");
    }
    f = warm->f;
    g = warm->g;
  }

  const double eps = cfg.eps;
  auto eps_at = [&](int it) {
    if (!cfg.anneal_eps0) return eps;
    return std::max(*cfg.anneal_eps0 / std::sqrt(static_cast<double>(it)), eps);
  };
  const auto* threshold = std::get_if<ThresholdBudget>(&cfg.budget);
  const int max_it = threshold ? threshold->max_iterations : std::get<FixedBudget>(cfg.budget).iterations;

  // sf = S_b(g), sg = S_a(f) for the current pair at temperature `cached_eps`
  Vector sf, sg, next;
  double cached_eps = -1.0;
  bool have_sf = false;
  bool have_sg = false;
  double err_rows = 0.0;
  double err_cols = 0.0;
  int it = 0;
  while (it < max_it) {
    ++it;
    const double e = eps_at(it);
    if (cfg.mode == SinkhornMode::Standard) {
      if (!(have_sf && cached_eps == e)) sweeps.rows(g, e, sf);
      f = sf;
      sweeps.cols(f, e, g);
    } else {
      if (!(have_sf && cached_eps == e)) sweeps.rows(g, e, sf);
      if (!(have_sg && cached_eps == e)) sweeps.cols(f, e, sg);
      f = 0.5 * (f + sf);
      g = 0.5 * (g + sg);
    }
    check_finite(f, g, it);
    have_sf = have_sg = false;

    if (threshold) {
      sweeps.rows(g, eps, sf);
      have_sf = true;
      if (cfg.mode == SinkhornMode::Standard && e == eps) {
        err_cols = 0.0;  // g = S_a(f) makes the column marginal exact
      } else {
        sweeps.cols(f, eps, sg);
        have_sg = true;
      }
      cached_eps = eps;
      err_rows = marginal_gap(a, f, sf, eps);
      if (have_sg) err_cols = marginal_gap(b, g, sg, eps);
      if (err_rows < threshold->tol && err_cols < threshold->tol) break;
    }
  }

  SinkhornResult res;
  res.iterations = it;
  if (!threshold) {
    sweeps.rows(g, eps, sf);
    err_rows = marginal_gap(a, f, sf, eps);
    if (cfg.mode == SinkhornMode::Standard && eps_at(it) == eps) {
      err_cols = 0.0;
    } else {
      sweeps.cols(f, eps, next);
      err_cols = marginal_gap(b, g, next, eps);
    }
  }
  res.marginal_error = err_rows + err_cols;
  res.coupling.f = std::move(f);
  res.coupling.g = std::move(g);
  res.coupling.eps_eff = eps;
  res.coupling.cost = cost;
  res.coupling.a = a;
  res.coupling.b = b;
  return res;
}

double eot_primal_value(const Matrix& pi, const Matrix& cost, const Vector& a, const Vector& b,
                        double eps) {
  if (pi.rows() != cost.rows() || pi.cols() != cost.cols()) {
    throw InputError("coupling and cost dimensions differ");
  }
  return (pi.array() * cost.array()).sum() + eps * kl_divergence(pi, a, b);
}

}  // namespace egw
