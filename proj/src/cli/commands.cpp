#include "egw/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "egw/divergence.hpp"
#include "egw/embedding.hpp"
#include "egw/io.hpp"
#include "egw/landscape.hpp"
#include "egw/solvers.hpp"
#include "egw/synthetic.hpp"

namespace egw::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---- options shared by the subcommands -------------------------------------

struct ProblemOptions {
  std::string source;
  std::string target;
  std::string cost = "sq_euclidean";
  std::string source_cost;
  std::string target_cost;
  Index dim_src = 20;
  Index dim_tgt = 20;
  bool normalize = true;
};

struct SolverOptions {
  double eps = 1e-3;
  int inner = 100;
  double inner_tol = 0.0;
  int inner_max = 100000;
  std::string sinkhorn = "symmetrized";
  int adaptive = 0;
  double outer_tol = 1e-5;
  int max_outer = 200;
  int patience = 5;
  std::string init = "product";
  double init_scale = 1.0;
  double anneal = 0.0;
  std::uint64_t seed = 0;
};

void add_problem_options(CLI::App* app, ProblemOptions& p, bool needs_target) {
  app->add_option("-s,--source", p.source, "Source point file (CSV, optional trailing 'w' weight column)");
  if (needs_target) app->add_option("-t,--target", p.target, "Target point file");
  app->add_option("--cost", p.cost,
                  "Base cost for both sides: sq_euclidean|euclidean|p_norm:<p>|exp:<sigma>|"
                  "embedding:<path>|matrix:<path>")
      ->capture_default_str();
  app->add_option("--source-cost", p.source_cost, "Source cost, overrides --cost");
  if (needs_target) app->add_option("--target-cost", p.target_cost, "Target cost, overrides --cost");
  app->add_option("-D,--dim", p.dim_src, "Source embedding dimension (clamped to the number of points)")
      ->capture_default_str();
  if (needs_target) {
    app->add_option("-E,--target-dim", p.dim_tgt, "Target embedding dimension (clamped likewise)")
        ->capture_default_str();
  }
  app->add_flag("--normalize,!--no-normalize", p.normalize, "Scale each cloud to radius 1 (default on)");
}

void add_solver_options(CLI::App* app, SolverOptions& s) {
  app->add_option("--eps", s.eps, "EGW temperature")->capture_default_str();
  app->add_option("--inner", s.inner, "Fixed number of Sinkhorn iterations per outer step")->capture_default_str();
  app->add_option("--inner-tol", s.inner_tol, "Stop Sinkhorn on this L1 marginal error instead of a fixed count");
  app->add_option("--inner-max", s.inner_max, "Iteration cap with --inner-tol")->capture_default_str();
  app->add_option("--sinkhorn", s.sinkhorn, "Sinkhorn variant: standard|symmetrized")->capture_default_str();
  app->add_flag("--adaptive{5}", s.adaptive,
                "Adaptive inner schedule starting from the given budget (default 5), doubled on increase");
  app->add_option("--outer-tol", s.outer_tol, "Stop when the objective decreases by less")->capture_default_str();
  app->add_option("--max-outer", s.max_outer, "Maximum number of outer steps")->capture_default_str();
  app->add_option("--patience", s.patience, "Consecutive increases tolerated with a fixed budget")
      ->capture_default_str();
  app->add_option("--init", s.init, "Initialization: product|random|landmarks:<file>")->capture_default_str();
  app->add_option("--init-scale", s.init_scale, "Scale of the random initialization")->capture_default_str();
  app->add_option("--anneal", s.anneal, "Final step with square-root annealing from this factor times eps (> 1)");
  app->add_option("--seed", s.seed, "Random seed")->capture_default_str();
}

json problem_json(const ProblemOptions& p) {
  return json{{"source", p.source},           {"target", p.target},       {"cost", p.cost},
              {"source_cost", p.source_cost}, {"target_cost", p.target_cost}, {"dim", p.dim_src},
              {"target_dim", p.dim_tgt},      {"normalize", p.normalize}};
}

json solver_json(const SolverOptions& s) {
  json j{{"eps", s.eps},          {"inner", s.inner},         {"inner_tol", s.inner_tol},
         {"inner_max", s.inner_max}, {"sinkhorn", s.sinkhorn}, {"adaptive", s.adaptive},
         {"outer_tol", s.outer_tol}, {"max_outer", s.max_outer}, {"patience", s.patience},
         {"init", s.init},        {"init_scale", s.init_scale}, {"anneal", s.anneal},
         {"seed", s.seed}};
  return j;
}

EgwConfig make_config(const SolverOptions& s) {
  EgwConfig cfg;
  cfg.eps = s.eps;
  if (s.sinkhorn == "standard") {
    cfg.inner.mode = SinkhornMode::Standard;
  } else if (s.sinkhorn == "symmetrized") {
    cfg.inner.mode = SinkhornMode::Symmetrized;
  } else {
    throw InputError("unknown Sinkhorn variant '" + s.sinkhorn + "'");
  }
  if (s.inner_tol > 0.0) {
    cfg.inner.budget = ThresholdBudget{s.inner_tol, s.inner_max};
  } else {
    if (s.inner < 1) throw InputError("--inner must be at least 1");
    cfg.inner.budget = FixedBudget{s.inner};
  }
  if (s.adaptive > 0) cfg.adaptive_start = s.adaptive;
  cfg.outer_tol = s.outer_tol;
  cfg.max_outer = s.max_outer;
  cfg.divergence_patience = s.patience;
  if (s.anneal != 0.0) {
    if (!(s.anneal > 1.0)) throw InputError("--anneal factor must exceed 1");
    cfg.final_anneal_factor = s.anneal;
  }
  cfg.validate();
  return cfg;
}

// ---- inputs ----------------------------------------------------------------

/// One side of a problem: a measure and either an ambient cost or a dense matrix.
struct Space {
  DiscreteMeasure measure;  // ambient points; one dummy column for matrix costs
  CostSpec spec;
  std::optional<Matrix> matrix;

  Index size() const { return measure.size(); }
};

Space load_space(const std::string& points, const std::string& cost_text, bool normalize,
                 const std::string& role) {
  Space s;
  s.spec = CostSpec::parse(cost_text);
  s.spec.validate();
  if (s.spec.kind == CostKind::DenseMatrix) {
    Matrix c = read_matrix(s.spec.path);
    validate_cost_matrix(c);
    Vector w = uniform_weights(c.rows());
    if (!points.empty()) {
      // the point file only supplies the weights here
      w = read_points(points).weights();
      if (w.size() != c.rows()) throw InputError(role + " weights and cost matrix differ in size");
    }
    s.measure = DiscreteMeasure(Matrix::Zero(c.rows(), 1), w);
    s.matrix = std::move(c);
    return s;
  }
  if (s.spec.kind == CostKind::Embedding) {
    s.measure = read_points(s.spec.path);
  } else {
    if (points.empty()) throw InputError("a " + role + " point file is required");
    s.measure = read_points(points);
  }
  if (normalize) s.measure = normalize_radius(s.measure);
  return s;
}

Space load_source(const ProblemOptions& p) {
  return load_space(p.source, p.source_cost.empty() ? p.cost : p.source_cost, p.normalize, "source");
}

Space load_target(const ProblemOptions& p) {
  return load_space(p.target, p.target_cost.empty() ? p.cost : p.target_cost, p.normalize, "target");
}

Index clamp_dim(Index d, Index n) {
  if (d < 1) throw InputError("embedding dimensions must be at least 1");
  return std::min(d, n);
}

EmbeddedMeasure embed(const Space& s, Index d) {
  if (s.matrix) return embed_cost_matrix(*s.matrix, s.measure.weights(), d);
  return embed_measure(s.measure, s.spec, d);
}

void check_dense_guard(Index n, Index m, const EgwConfig& cfg) {
  const Index biggest = std::max({n * m, n * n, m * m});
  if (biggest > cfg.dense_guard) {
    throw InputError("memory guard: the dense solvers would store " + std::to_string(biggest) +
                     " entries per matrix (limit " + std::to_string(cfg.dense_guard) +
                     "); use the cnt or multiscale solver");
  }
}

Matrix dense_cost(const Space& s) {
  if (s.matrix) return *s.matrix;
  return cost_matrix(s.measure.points(), s.spec);
}

GammaInit resolve_init(const SolverOptions& s, const EmbeddedMeasure& src, const EmbeddedMeasure& tgt) {
  if (s.init == "product") return ProductInit{};
  if (s.init == "random") return RandomInit{s.seed, s.init_scale};
  if (s.init.rfind("landmarks:", 0) == 0) {
    return GivenInit{landmark_gamma(read_pairs(s.init.substr(10)), src, tgt)};
  }
  throw InputError("unknown initialization '" + s.init + "'");
}

PlanInit resolve_plan_init(const SolverOptions& s, Index n, Index m) {
  if (s.init == "product") return {};
  if (s.init.rfind("landmarks:", 0) == 0) {
    Matrix w = Matrix::Zero(n, m);
    for (const auto& [i, j] : read_pairs(s.init.substr(10))) {
      if (i >= n || j >= m) throw InputError("landmark index out of range");
      w(i, j) += 1.0;
    }
    return w;
  }
  if (s.init == "random") throw InputError("random initialization needs the cnt or multiscale solver");
  throw InputError("unknown initialization '" + s.init + "'");
}

// ---- outputs ---------------------------------------------------------------

struct Output {
  fs::path dir;
  std::vector<std::string> header;

  Output(const std::string& d, const std::string& command, const json& config) : dir(d) {
    fs::create_directories(dir);
    header = {"egw " + command, "config " + config.dump()};
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  void write_json(const std::string& name, const json& j) const {
    std::ofstream os(path(name));
    if (!os) throw InputError("cannot open '" + path(name) + "' for writing");
    os << std::setw(2) << j << '\n';
  }
};

json trace_json(const SolveTrace& t) {
  json sched = json::array();
  for (const auto& [step, budget] : t.schedule) sched.push_back({{"step", step}, {"inner", budget}});
  return json{{"outer_steps", t.rows.size()},
              {"converged", t.converged},
              {"final_marginal_err", t.rows.empty() ? 0.0 : t.rows.back().marginal_err},
              {"elapsed_s", t.rows.empty() ? 0.0 : t.rows.back().elapsed_s},
              {"inner_schedule", sched}};
}

json embedding_json(const EmbeddedMeasure& e) {
  return json{{"n", e.size()},
              {"dim", e.dim()},
              {"explained_variance", e.explained_variance},
              {"clamped_eigenvalues", e.clamped_eigenvalues}};
}

std::vector<std::string> coord_header(Index dim) {
  std::vector<std::string> h;
  for (Index k = 0; k < dim; ++k) h.push_back("x" + std::to_string(k));
  return h;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- solve -----------------------------------------------------------------

struct SolveArgs {
  ProblemOptions problem;
  SolverOptions solver;
  std::string algorithm = "cnt";
  double rho = 0.1;
  std::string out = "egw_out";
  double coupling_threshold = 1e-12;
};

int cmd_solve(const SolveArgs& a, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  EgwConfig cfg = make_config(a.solver);
  const Space src = load_source(a.problem);
  const Space tgt = load_target(a.problem);
  const Index n = src.size();
  const Index m = tgt.size();
  const bool dense = a.algorithm == "kernel" || a.algorithm == "entropic";
  if (!dense && a.algorithm != "cnt" && a.algorithm != "multiscale") {
    throw InputError("unknown solver '" + a.algorithm + "'");
  }
  if (dense) check_dense_guard(n, m, cfg);

  json config{{"command", "solve"}, {"solver", a.algorithm}, {"rho", a.rho}};
  config["problem"] = problem_json(a.problem);
  config["solver_options"] = solver_json(a.solver);
  config["n"] = n;
  config["m"] = m;

  json summary{{"solver", a.algorithm}, {"n", n}, {"m", m}};
  SolveTrace trace;
  if (dense) {
    const Matrix cx = dense_cost(src);
    const Matrix cy = dense_cost(tgt);
    const PlanInit init = resolve_plan_init(a.solver, n, m);
    const DenseResult r = a.algorithm == "kernel"
                              ? solve_kernel_gw(cx, cy, src.measure.weights(), tgt.measure.weights(), cfg, init)
                              : solve_entropic_gw_baseline(cx, cy, src.measure.weights(),
                                                           tgt.measure.weights(), cfg, init);
    const Output o(a.out, "solve", config);
    write_triplets(o.path("coupling.csv"), r.coupling.pi, o.header, a.coupling_threshold);
    summary["objective"] = r.objective;
    summary["gw_loss"] = gw_loss(r.coupling.pi, cx, cy);
    trace = r.trace;
    summary["trace"] = trace_json(trace);
    write_trace(o.path("trace.csv"), trace, o.header);
    summary["elapsed_s"] = seconds_since(t0);
    summary["config"] = config;
    o.write_json("summary.json", summary);
  } else {
    const Index d = clamp_dim(a.problem.dim_src, n);
    const Index e = clamp_dim(a.problem.dim_tgt, m);
    const EmbeddedMeasure es = embed(src, d);
    const EmbeddedMeasure et = embed(tgt, e);
    cfg.init = resolve_init(a.solver, es, et);
    config["resolved_dim"] = es.dim();
    config["resolved_target_dim"] = et.dim();
    summary["source_embedding"] = embedding_json(es);
    summary["target_embedding"] = embedding_json(et);
    CntResult r;
    if (a.algorithm == "cnt") {
      r = solve_cnt_gw(es, et, cfg);
    } else {
      MultiscaleResult ms = solve_multiscale(es, et, cfg, a.rho, a.solver.seed);
      summary["coarse"] = json{{"n", ms.coarse_src_weights.size()},
                               {"m", ms.coarse_tgt_weights.size()},
                               {"objective", ms.coarse.objective},
                               {"trace", trace_json(ms.coarse.trace)}};
      r = std::move(ms.fine);
    }
    const Output o(a.out, "solve", config);
    const GwValueReport v = gw_value(r.gamma, r.coupling, es, et, cfg.eps);
    summary["objective"] = r.objective;
    summary["constant"] = r.constant;
    // at Gamma = Gamma*(pi) the entropy-free part of C + 8F is the GW loss of pi
    summary["gw_loss"] = v.gw_eps - 8.0 * v.kl_term;
    summary["kl_term"] = v.kl_term;
    summary["separability_warning"] = separability_warning(es, cfg.eps) || separability_warning(et, cfg.eps);
    write_triplets(o.path("coupling.csv"), r.coupling, o.header, a.coupling_threshold);
    write_matrix(o.path("gamma.csv"), r.gamma, o.header);
    trace = r.trace;
    summary["trace"] = trace_json(trace);
    write_trace(o.path("trace.csv"), trace, o.header);
    summary["elapsed_s"] = seconds_since(t0);
    summary["config"] = config;
    o.write_json("summary.json", summary);
  }
  out << std::setw(2) << summary << '\n';
  return kOk;
}

// ---- sgw / grad / flow -----------------------------------------------------

struct DivergenceArgs {
  ProblemOptions problem;
  SolverOptions solver;
  std::string out = "egw_out";
};

void require_embeddable(const Space& s, const std::string& role) {
  if (s.matrix) throw InputError(role + ": this command needs coordinates, not a cost matrix");
}

int cmd_sgw(const DivergenceArgs& a, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  EgwConfig cfg = make_config(a.solver);
  const Space src = load_source(a.problem);
  const Space tgt = load_target(a.problem);
  const EmbeddedMeasure es = embed(src, clamp_dim(a.problem.dim_src, src.size()));
  const EmbeddedMeasure et = embed(tgt, clamp_dim(a.problem.dim_tgt, tgt.size()));
  cfg.init = resolve_init(a.solver, es, et);
  const GwValueReport r = sgw(es, et, cfg);
  json config{{"command", "sgw"}, {"problem", problem_json(a.problem)}, {"solver_options", solver_json(a.solver)}};
  json summary{{"gw_eps", r.gw_eps},
               {"gw_source_source", r.gw_aa},
               {"gw_target_target", r.gw_bb},
               {"sgw", *r.sgw},
               {"constant", r.constant},
               {"separability_warning", r.separability_warning},
               {"source_embedding", embedding_json(es)},
               {"target_embedding", embedding_json(et)},
               {"elapsed_s", seconds_since(t0)},
               {"config", config}};
  const Output o(a.out, "sgw", config);
  o.write_json("sgw.json", summary);
  out << std::setw(2) << summary << '\n';
  return kOk;
}

struct GradArgs {
  DivergenceArgs base;
  std::string of = "gw";
  std::string side = "source";
};

int cmd_grad(const GradArgs& g, std::ostream& out) {
  const DivergenceArgs& a = g.base;
  const auto t0 = std::chrono::steady_clock::now();
  EgwConfig cfg = make_config(a.solver);
  const Space src = load_source(a.problem);
  const Space tgt = load_target(a.problem);
  require_embeddable(src, "source");
  require_embeddable(tgt, "target");
  const MeasuredSpace ms{src.measure, src.spec, clamp_dim(a.problem.dim_src, src.size())};
  const MeasuredSpace mt{tgt.measure, tgt.spec, clamp_dim(a.problem.dim_tgt, tgt.size())};
  if (a.solver.init != "product") cfg.init = resolve_init(a.solver, ms.embed(), mt.embed());
  PositionGradient r;
  if (g.of == "sgw") {
    if (g.side != "source") throw InputError("SGW gradients are computed for the source side");
    r = sgw_gradient(ms, mt, cfg);
  } else if (g.of == "gw") {
    Side side = Side::Source;
    if (g.side == "target") {
      side = Side::Target;
    } else if (g.side == "both") {
      side = Side::Both;
    } else if (g.side != "source") {
      throw InputError("unknown side '" + g.side + "'");
    }
    r = egw_gradient(ms, mt, cfg, side);
  } else {
    throw InputError("unknown gradient target '" + g.of + "'");
  }
  json config{{"command", "grad"},
              {"of", g.of},
              {"side", g.side},
              {"problem", problem_json(a.problem)},
              {"solver_options", solver_json(a.solver)}};
  const Output o(a.out, "grad", config);
  json summary{{"of", g.of}, {"value", r.value}, {"approximate", r.approximate}};
  if (r.src.size() > 0) {
    write_matrix(o.path("grad_source.csv"), r.src, o.header, coord_header(r.src.cols()));
    summary["source_grad_norm"] = r.src.norm();
  }
  if (r.tgt.size() > 0) {
    write_matrix(o.path("grad_target.csv"), r.tgt, o.header, coord_header(r.tgt.cols()));
    summary["target_grad_norm"] = r.tgt.norm();
  }
  summary["elapsed_s"] = seconds_since(t0);
  summary["config"] = config;
  o.write_json("grad.json", summary);
  out << std::setw(2) << summary << '\n';
  return kOk;
}

struct FlowArgs {
  ProblemOptions problem;
  SolverOptions solver;
  std::vector<std::string> targets;
  std::vector<double> lambdas;
  int steps = 100;
  double step_size = 0.1;
  std::string out = "egw_out";
};

int cmd_flow(const FlowArgs& a, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  EgwConfig cfg = make_config(a.solver);
  if (a.solver.init != "product") throw InputError("gradient flows start every solve from the product plan");
  const Space moving = load_source(a.problem);
  require_embeddable(moving, "source");
  if (a.targets.empty()) throw InputError("at least one --target is required");
  if (!a.lambdas.empty() && a.lambdas.size() != a.targets.size()) {
    throw InputError("give one --lambda per --target");
  }
  std::vector<FlowTarget> targets;
  for (size_t k = 0; k < a.targets.size(); ++k) {
    const Space t = load_space(a.targets[k], a.problem.target_cost.empty() ? a.problem.cost : a.problem.target_cost,
                               a.problem.normalize, "target");
    require_embeddable(t, "target");
    targets.push_back(FlowTarget{MeasuredSpace{t.measure, t.spec, clamp_dim(a.problem.dim_tgt, t.size())},
                                 a.lambdas.empty() ? 1.0 : a.lambdas[k]});
  }
  const MeasuredSpace ms{moving.measure, moving.spec, clamp_dim(a.problem.dim_src, moving.size())};
  const std::vector<FlowStep> traj = gradient_flow(ms, targets, cfg, a.steps, a.step_size);

  json config{{"command", "flow"},
              {"targets", a.targets},
              {"lambdas", a.lambdas},
              {"steps", a.steps},
              {"step_size", a.step_size},
              {"problem", problem_json(a.problem)},
              {"solver_options", solver_json(a.solver)}};
  const Output o(a.out, "flow", config);
  const Index dim = ms.measure.dim();
  {
    std::ofstream os(o.path("flow_points.csv"));
    if (!os) throw InputError("cannot open '" + o.path("flow_points.csv") + "' for writing");
    os << std::setprecision(17);
    for (const auto& h : o.header) os << "# " << h << '\n';
    os << "step,i";
    for (const auto& c : coord_header(dim)) os << ',' << c;
    os << '\n';
    auto dump = [&](int step, const Matrix& p) {
      for (Index i = 0; i < p.rows(); ++i) {
        os << step << ',' << i;
        for (Index k = 0; k < dim; ++k) os << ',' << p(i, k);
        os << '\n';
      }
    };
    dump(0, ms.measure.points());
    for (const auto& s : traj) dump(s.step + 1, s.points);
  }
  Matrix obj(traj.size(), 2);
  int decreasing = 0;
  for (size_t s = 0; s < traj.size(); ++s) {
    obj(s, 0) = traj[s].step;
    obj(s, 1) = traj[s].objective;
    if (s > 0 && traj[s].objective <= traj[s - 1].objective) ++decreasing;
  }
  write_matrix(o.path("flow_objective.csv"), obj, o.header, {"step", "objective"});
  json summary{{"steps", traj.size()},
               {"initial_objective", traj.empty() ? 0.0 : traj.front().objective},
               {"final_objective", traj.empty() ? 0.0 : traj.back().objective},
               {"non_increasing_steps", decreasing},
               {"elapsed_s", seconds_since(t0)},
               {"config", config}};
  o.write_json("flow.json", summary);
  out << std::setw(2) << summary << '\n';
  return kOk;
}

// ---- embed / diag ----------------------------------------------------------

struct EmbedArgs {
  std::string input;
  std::string cost = "sq_euclidean";
  Index dim = 20;
  bool normalize = true;
  std::string out = "egw_out";
};

int cmd_embed(const EmbedArgs& a, std::ostream& out) {
  const Space s = load_space(a.input, a.cost, a.normalize, "input");
  if (a.dim > s.size()) {
    throw InputError("embedding dimension " + std::to_string(a.dim) + " exceeds the number of points " +
                     std::to_string(s.size()));
  }
  const EmbeddedMeasure e = embed(s, a.dim);
  json config{{"command", "embed"}, {"input", a.input}, {"cost", a.cost}, {"dim", a.dim}, {"normalize", a.normalize}};
  const Output o(a.out, "embed", config);
  Matrix table(e.size(), e.dim() + 1);
  table << e.features(), e.weights();
  std::vector<std::string> header = coord_header(e.dim());
  header.push_back("w");
  write_matrix(o.path("embedding.csv"), table, o.header, header);
  const Vector spec = covariance_spectrum(e);
  json summary = embedding_json(e);
  summary["covariance_spectrum"] = std::vector<double>(spec.data(), spec.data() + spec.size());
  summary["config"] = config;
  o.write_json("embed.json", summary);
  out << std::setw(2) << summary << '\n';
  return kOk;
}

struct DiagArgs {
  std::string input;
  std::string cost = "sq_euclidean";
  bool normalize = true;
  double eps = 1e-3;
  Index dim = 20;
  std::string out = "egw_out";
};

int cmd_diag(const DiagArgs& a, std::ostream& out) {
  const Space s = load_space(a.input, a.cost, a.normalize, "input");
  const Matrix c = dense_cost(s);
  const CntReport r = cnt_diagnostic(c, s.measure.weights());
  json config{{"command", "diag"}, {"input", a.input}, {"cost", a.cost}, {"eps", a.eps}, {"dim", a.dim},
              {"normalize", a.normalize}};
  json summary{{"is_cnt", r.is_cnt},
               {"min_eigenvalue", r.min_eigenvalue},
               {"max_abs_eigenvalue", r.max_abs_eigenvalue}};
  if (r.is_cnt) {
    const EmbeddedMeasure e = embed(s, clamp_dim(a.dim, s.size()));
    const Vector spec = covariance_spectrum(e);
    summary["embedding"] = embedding_json(e);
    summary["covariance_spectrum"] = std::vector<double>(spec.data(), spec.data() + spec.size());
    summary["separability_warning"] = separability_warning(e, a.eps);
  }
  summary["config"] = config;
  const Output o(a.out, "diag", config);
  o.write_json("diag.json", summary);
  out << std::setw(2) << summary << '\n';
  return kOk;
}

// ---- landscape -------------------------------------------------------------

struct LandscapeArgs {
  ProblemOptions problem;
  SolverOptions solver;
  int seeds = 50;
  double dedup_tol = 0.0;
  double rho = 0.1;
  int grid = 0;
  double grid_extent = 0.0;
  std::string out = "egw_out";
};

int cmd_landscape(const LandscapeArgs& a, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const EgwConfig cfg = make_config(a.solver);
  if (a.solver.init != "product" && a.solver.init != "random") {
    throw InputError("landscape exploration draws its own random initializations");
  }
  const Space src = load_source(a.problem);
  const Space tgt = load_target(a.problem);
  const EmbeddedMeasure es = embed(src, clamp_dim(a.problem.dim_src, src.size()));
  const EmbeddedMeasure et = embed(tgt, clamp_dim(a.problem.dim_tgt, tgt.size()));
  LandscapeConfig lcfg;
  lcfg.n_seeds = a.seeds;
  if (a.dedup_tol > 0.0) lcfg.dedup_tol = a.dedup_tol;
  lcfg.rho = a.rho;
  lcfg.seed = a.solver.seed;
  lcfg.init_scale = a.solver.init_scale;
  const LandscapeReport rep = explore(es, et, cfg, lcfg);

  json config{{"command", "landscape"}, {"seeds", a.seeds},     {"dedup_tol", a.dedup_tol}, {"rho", a.rho},
              {"grid", a.grid},         {"grid_extent", a.grid_extent}, {"problem", problem_json(a.problem)},
              {"solver_options", solver_json(a.solver)}};
  const Output o(a.out, "landscape", config);
  json minima = json::array();
  Matrix table(rep.minima.size(), 3 + rep.coords.cols());
  for (size_t k = 0; k < rep.minima.size(); ++k) {
    const LocalMinimum& m = rep.minima[k];
    json entry{{"index", k}, {"objective", m.objective}, {"basin_count", m.basin_count}, {"grad_norm", m.grad_norm}};
    std::vector<double> xy(rep.coords.cols());
    for (Index c = 0; c < rep.coords.cols(); ++c) xy[c] = rep.coords(k, c);
    entry["pca"] = xy;
    minima.push_back(entry);
    table(k, 0) = m.basin_count;
    table(k, 1) = m.objective;
    table(k, 2) = m.grad_norm;
    for (Index c = 0; c < rep.coords.cols(); ++c) table(k, 3 + c) = rep.coords(k, c);
    write_matrix(o.path("minimum_" + std::to_string(k) + ".csv"), m.gamma, o.header);
  }
  std::vector<std::string> header{"basin_count", "objective", "grad_norm"};
  for (Index c = 0; c < rep.coords.cols(); ++c) header.push_back("pc" + std::to_string(c + 1));
  if (!rep.minima.empty()) write_matrix(o.path("minima.csv"), table, o.header, header);

  json summary{{"n_seeds", rep.n_seeds},
               {"failures", rep.failures},
               {"failure_messages", rep.failure_messages},
               {"dedup_tol", rep.dedup_tol},
               {"minima", minima}};
  if (a.grid > 0 && !rep.minima.empty()) {
    if (rep.loadings.rows() < 2) throw InputError("the contour grid needs a Gamma space of dimension >= 2");
    const Matrix& center = rep.minima.front().gamma;
    auto direction = [&](Index r) {
      Matrix d(center.rows(), center.cols());
      Eigen::Map<Eigen::RowVectorXd>(d.data(), d.size()) = rep.loadings.row(r);
      return d;
    };
    const double extent = a.grid_extent > 0.0 ? a.grid_extent : std::max(center.norm(), 1e-3);
    std::vector<double> u(a.grid);
    for (int k = 0; k < a.grid; ++k) u[k] = a.grid == 1 ? 0.0 : -extent + 2.0 * extent * k / (a.grid - 1);
    const Matrix values = objective_grid(es, et, cfg, center, direction(0), direction(1), u, u);
    Matrix grid(a.grid * a.grid, 3);
    for (int k = 0; k < a.grid; ++k) {
      for (int l = 0; l < a.grid; ++l) grid.row(k * a.grid + l) << u[k], u[l], values(k, l);
    }
    write_matrix(o.path("grid.csv"), grid, o.header, {"u", "v", "value"});
    summary["grid_extent"] = extent;
  }
  summary["elapsed_s"] = seconds_since(t0);
  summary["config"] = config;
  o.write_json("landscape.json", summary);
  out << std::setw(2) << summary << '\n';
  return rep.minima.empty() ? kSolverFailure : kOk;
}

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
  SolverOptions solver;
  std::vector<std::string> solvers{"cnt", "multiscale"};
  std::vector<Index> sizes{200};
  int seeds = 1;
  Index ambient = 2;
  double noise = 0.02;
  double rho = 0.1;
  Index dim = 20;
  double tol_rel = 1e-3;
  std::string out = "egw_out";
};

struct BenchRun {
  std::string solver;
  Index n = 0;
  int seed = 0;
  bool ok = false;
  std::string message;
  SolveTrace trace;
  double offset_s = 0.0;  // time spent before the traced solve (coarse phase)
  double total_s = 0.0;
  double objective = 0.0;
};

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  const EgwConfig cfg = make_config(a.solver);
  if (a.solvers.empty() || a.sizes.empty() || a.seeds < 1) throw InputError("bench needs at least one configuration");
  for (const auto& s : a.solvers) {
    if (s != "cnt" && s != "multiscale" && s != "kernel" && s != "entropic") {
      throw InputError("unknown solver '" + s + "'");
    }
  }
  if (a.solver.init != "product") throw InputError("bench runs start from the product plan");

  std::vector<BenchRun> runs;
  for (Index n : a.sizes) {
    if (n < 2) throw InputError("bench sizes must be at least 2");
    for (int seed = 0; seed < a.seeds; ++seed) {
      for (const auto& s : a.solvers) {
        BenchRun r;
        r.solver = s;
        r.n = n;
        r.seed = seed;
        runs.push_back(std::move(r));
      }
    }
  }

  // each run builds its own instance from (n, seed), so the runs are independent
#pragma omp parallel for schedule(dynamic)
  for (size_t r = 0; r < runs.size(); ++r) {
    BenchRun& run = runs[r];
    try {
      synthetic::Rng rng(a.solver.seed + 7919ull * static_cast<std::uint64_t>(run.n) + static_cast<std::uint64_t>(run.seed));
      const DiscreteMeasure src = normalize_radius(DiscreteMeasure(synthetic::gaussian_cloud(rng, run.n, a.ambient)));
      const Matrix rot = synthetic::random_rotation(rng, a.ambient);
      const std::vector<Index> perm = synthetic::random_permutation(rng, run.n);
      const Matrix moved = synthetic::rotate_permute(src.points(), rot, perm) +
                           a.noise * synthetic::gaussian_cloud(rng, run.n, a.ambient);
      const DiscreteMeasure tgt = normalize_radius(DiscreteMeasure(moved));
      const auto t0 = std::chrono::steady_clock::now();
      if (run.solver == "kernel" || run.solver == "entropic") {
        check_dense_guard(run.n, run.n, cfg);
        const Matrix cx = cost_matrix(src.points(), CostSpec::sq_euclidean());
        const Matrix cy = cost_matrix(tgt.points(), CostSpec::sq_euclidean());
        const DenseResult res = run.solver == "kernel"
                                    ? solve_kernel_gw(cx, cy, src.weights(), tgt.weights(), cfg)
                                    : solve_entropic_gw_baseline(cx, cy, src.weights(), tgt.weights(), cfg);
        run.trace = res.trace;
        run.objective = res.objective;
      } else {
        const Index d = std::min(a.dim, run.n);
        const EmbeddedMeasure es = embed_measure(src, CostSpec::sq_euclidean(), d);
        const EmbeddedMeasure et = embed_measure(tgt, CostSpec::sq_euclidean(), d);
        const auto t1 = std::chrono::steady_clock::now();
        if (run.solver == "cnt") {
          const CntResult res = solve_cnt_gw(es, et, cfg);
          run.trace = res.trace;
          run.objective = res.objective;
          run.offset_s = std::chrono::duration<double>(t1 - t0).count();
        } else {
          const MultiscaleResult res = solve_multiscale(es, et, cfg, a.rho, static_cast<std::uint64_t>(run.seed));
          run.trace = res.fine.trace;
          run.objective = res.fine.objective;
          const double fine_s = run.trace.rows.empty() ? 0.0 : run.trace.rows.back().elapsed_s;
          run.offset_s = seconds_since(t0) - fine_s;
        }
      }
      run.total_s = seconds_since(t0);
      run.ok = true;
    } catch (const std::exception& e) {
      run.message = e.what();
    }
  }

  json config{{"command", "bench"}, {"solvers", a.solvers}, {"sizes", a.sizes}, {"seeds", a.seeds},
              {"ambient", a.ambient}, {"noise", a.noise},   {"rho", a.rho},     {"dim", a.dim},
              {"tol_rel", a.tol_rel}, {"solver_options", solver_json(a.solver)}};
  const Output o(a.out, "bench", config);

  // common best objective per instance
  std::map<std::pair<Index, int>, double> best;
  for (const auto& r : runs) {
    if (!r.ok) continue;
    const auto key = std::make_pair(r.n, r.seed);
    const auto it = best.find(key);
    if (it == best.end() || r.objective < it->second) best[key] = r.objective;
  }

  std::ostringstream table;
  table << std::setprecision(17);
  for (const auto& h : o.header) table << "# " << h << '\n';
  table << "solver,n,seed,status,final_objective,outer_steps,time_to_tol_s,total_s\n";
  json run_list = json::array();
  std::map<std::pair<std::string, Index>, std::vector<const BenchRun*>> groups;
  std::map<const BenchRun*, double> ttt;
  for (const auto& r : runs) {
    groups[{r.solver, r.n}].push_back(&r);
    if (!r.ok) {
      err << "bench: " << r.solver << " n=" << r.n << " seed=" << r.seed << " failed: " << r.message << '\n';
      table << r.solver << ',' << r.n << ',' << r.seed << ",failed,,,,\n";
      run_list.push_back({{"solver", r.solver}, {"n", r.n}, {"seed", r.seed}, {"status", "failed"},
                          {"message", r.message}});
      continue;
    }
    const double target = best[{r.n, r.seed}] + a.tol_rel * std::abs(best[{r.n, r.seed}]);
    double t_tol = std::nan("");
    for (const auto& row : r.trace.rows) {
      if (row.objective <= target) {
        t_tol = r.offset_s + row.elapsed_s;
        break;
      }
    }
    ttt[&r] = t_tol;
    const std::string trace_name =
        "trace_" + r.solver + "_n" + std::to_string(r.n) + "_s" + std::to_string(r.seed) + ".csv";
    write_trace(o.path(trace_name), r.trace, o.header);
    table << r.solver << ',' << r.n << ',' << r.seed << ",ok," << r.objective << ',' << r.trace.rows.size() << ','
          << t_tol << ',' << r.total_s << '\n';
    run_list.push_back({{"solver", r.solver},
                        {"n", r.n},
                        {"seed", r.seed},
                        {"status", "ok"},
                        {"final_objective", r.objective},
                        {"outer_steps", r.trace.rows.size()},
                        {"time_to_tol_s", std::isnan(t_tol) ? json(nullptr) : json(t_tol)},
                        {"total_s", r.total_s},
                        {"trace", trace_name}});
  }
  {
    std::ofstream os(o.path("bench_runs.csv"));
    if (!os) throw InputError("cannot open '" + o.path("bench_runs.csv") + "' for writing");
    os << table.str();
  }

  std::ofstream agg(o.path("bench_summary.csv"));
  if (!agg) throw InputError("cannot open '" + o.path("bench_summary.csv") + "' for writing");
  agg << std::setprecision(17);
  for (const auto& h : o.header) agg << "# " << h << '\n';
  agg << "solver,n,runs,failures,median_time_to_tol_s,median_final_objective,median_outer_steps\n";
  json summary_rows = json::array();
  for (const auto& [key, group] : groups) {
    std::vector<double> times;
    std::vector<double> objs;
    std::vector<double> steps;
    int failures = 0;
    for (const BenchRun* r : group) {
      if (!r->ok) {
        ++failures;
        continue;
      }
      if (!std::isnan(ttt[r])) times.push_back(ttt[r]);
      objs.push_back(r->objective);
      steps.push_back(static_cast<double>(r->trace.rows.size()));
    }
    agg << key.first << ',' << key.second << ',' << group.size() << ',' << failures << ',' << median(times) << ','
        << median(objs) << ',' << median(steps) << '\n';
    summary_rows.push_back({{"solver", key.first},
                            {"n", key.second},
                            {"runs", group.size()},
                            {"failures", failures},
                            {"median_time_to_tol_s", times.empty() ? json(nullptr) : json(median(times))},
                            {"median_final_objective", objs.empty() ? json(nullptr) : json(median(objs))},
                            {"median_outer_steps", steps.empty() ? json(nullptr) : json(median(steps))}});
  }
  json summary{{"summary", summary_rows}, {"runs", run_list}, {"config", config}};
  o.write_json("bench.json", summary);
  out << std::setw(2) << json{{"summary", summary_rows}} << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entropic Gromov-Wasserstein solvers for conditionally negative type costs", "egw"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* c_solve = app.add_subcommand("solve", "Solve an EGW problem between two clouds");
  add_problem_options(c_solve, solve.problem, true);
  add_solver_options(c_solve, solve.solver);
  c_solve->add_option("--solver", solve.algorithm, "cnt|kernel|entropic|multiscale")->capture_default_str();
  c_solve->add_option("--rho", solve.rho, "Coarsening ratio of the multiscale solver")->capture_default_str();
  c_solve->add_option("--coupling-threshold", solve.coupling_threshold, "Smallest coupling entry written")
      ->capture_default_str();
  c_solve->add_option("-o,--out", solve.out, "Output directory")->capture_default_str();

  DivergenceArgs sgw_args;
  auto* c_sgw = app.add_subcommand("sgw", "Debiased Sinkhorn-GW divergence");
  add_problem_options(c_sgw, sgw_args.problem, true);
  add_solver_options(c_sgw, sgw_args.solver);
  c_sgw->add_option("-o,--out", sgw_args.out, "Output directory")->capture_default_str();

  GradArgs grad;
  auto* c_grad = app.add_subcommand("grad", "Gradients of GW_eps or SGW with respect to point positions");
  add_problem_options(c_grad, grad.base.problem, true);
  add_solver_options(c_grad, grad.base.solver);
  c_grad->add_option("--of", grad.of, "gw|sgw")->capture_default_str();
  c_grad->add_option("--side", grad.side, "source|target|both")->capture_default_str();
  c_grad->add_option("-o,--out", grad.base.out, "Output directory")->capture_default_str();

  FlowArgs flow;
  auto* c_flow = app.add_subcommand("flow", "Gradient flow of a weighted sum of SGW divergences");
  add_problem_options(c_flow, flow.problem, false);
  add_solver_options(c_flow, flow.solver);
  c_flow->add_option("-t,--target", flow.targets, "Target point file (repeatable)");
  c_flow->add_option("--target-cost", flow.problem.target_cost, "Target cost, overrides --cost");
  c_flow->add_option("-E,--target-dim", flow.problem.dim_tgt, "Target embedding dimension")->capture_default_str();
  c_flow->add_option("--lambda", flow.lambdas, "Weight of each target, in order (default 1)");
  c_flow->add_option("--steps", flow.steps, "Number of descent steps")->capture_default_str();
  c_flow->add_option("--step-size", flow.step_size, "Step size (in units of the cloud radius)")
      ->capture_default_str();
  c_flow->add_option("-o,--out", flow.out, "Output directory")->capture_default_str();

  EmbedArgs emb;
  auto* c_embed = app.add_subcommand("embed", "Kernel PCA embedding of a cloud");
  c_embed->add_option("-i,--input", emb.input, "Point file (or weights for matrix:<path>)");
  c_embed->add_option("--cost", emb.cost, "Base cost")->capture_default_str();
  c_embed->add_option("-D,--dim", emb.dim, "Embedding dimension")->capture_default_str();
  c_embed->add_flag("--normalize,!--no-normalize", emb.normalize, "Scale the cloud to radius 1 (default on)");
  c_embed->add_option("-o,--out", emb.out, "Output directory")->capture_default_str();

  DiagArgs diag;
  auto* c_diag = app.add_subcommand("diag", "Conditionally-negative-type diagnostic of a cost");
  c_diag->add_option("-i,--input", diag.input, "Point file (or weights for matrix:<path>)");
  c_diag->add_option("--cost", diag.cost, "Base cost")->capture_default_str();
  c_diag->add_option("--eps", diag.eps, "Temperature for the separability check")->capture_default_str();
  c_diag->add_option("-D,--dim", diag.dim, "Embedding dimension for the covariance spectrum")->capture_default_str();
  c_diag->add_flag("--normalize,!--no-normalize", diag.normalize, "Scale the cloud to radius 1 (default on)");
  c_diag->add_option("-o,--out", diag.out, "Output directory")->capture_default_str();

  LandscapeArgs land;
  auto* c_land = app.add_subcommand("landscape", "Multi-seed exploration of the EGW landscape");
  add_problem_options(c_land, land.problem, true);
  add_solver_options(c_land, land.solver);
  c_land->add_option("--seeds", land.seeds, "Number of random initializations")->capture_default_str();
  c_land->add_option("--dedup-tol", land.dedup_tol, "Distance under which minima merge (default 1e-2 x median |Gamma|)");
  c_land->add_option("--rho", land.rho, "Coarsening ratio of the coarse phase")->capture_default_str();
  c_land->add_option("--grid", land.grid, "Contour grid resolution on the PCA plane (0: none)")->capture_default_str();
  c_land->add_option("--grid-extent", land.grid_extent, "Half-width of the grid (default |Gamma| of the top minimum)");
  c_land->add_option("-o,--out", land.out, "Output directory")->capture_default_str();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Solver benchmark on synthetic rotated copies");
  add_solver_options(c_bench, bench.solver);
  c_bench->add_option("--solvers", bench.solvers, "Solvers to compare")->delimiter(',')->capture_default_str();
  c_bench->add_option("--sizes", bench.sizes, "Cloud sizes")->delimiter(',')->capture_default_str();
  c_bench->add_option("--seeds", bench.seeds, "Instances per size")->capture_default_str();
  c_bench->add_option("--ambient", bench.ambient, "Ambient dimension of the clouds")->capture_default_str();
  c_bench->add_option("--noise", bench.noise, "Noise added to the rotated copy")->capture_default_str();
  c_bench->add_option("--rho", bench.rho, "Coarsening ratio of the multiscale solver")->capture_default_str();
  c_bench->add_option("-D,--dim", bench.dim, "Embedding dimension")->capture_default_str();
  c_bench->add_option("--tol-rel", bench.tol_rel, "Relative gap to the best objective defining time-to-tolerance")
      ->capture_default_str();
  c_bench->add_option("-o,--out", bench.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (c_solve->parsed()) return cmd_solve(solve, out);
    if (c_sgw->parsed()) return cmd_sgw(sgw_args, out);
    if (c_grad->parsed()) return cmd_grad(grad, out);
    if (c_flow->parsed()) return cmd_flow(flow, out);
    if (c_embed->parsed()) return cmd_embed(emb, out);
    if (c_diag->parsed()) return cmd_diag(diag, out);
    if (c_land->parsed()) return cmd_landscape(land, out);
    if (c_bench->parsed()) return cmd_bench(bench, out, err);
  } catch (const InputError& e) {
    err << "egw: input error: " << e.what() << '\n';
    return kInputError;
  } catch (const SolverError& e) {
    err << "egw: solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const fs::filesystem_error& e) {
    err << "egw: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "egw: " << e.what() << '\n';
    return kSolverFailure;
  }
  return kInputError;
}

}  // namespace egw::cli
