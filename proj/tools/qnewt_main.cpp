// qnewt: command-line front end. Builds spaces and objectives from JSON
// configs, runs solves / axiom checks / differentiability checks /
// certificates, and emits CSV traces plus JSON reports on stdout.
//
// Exit codes: 0 success; 2 when an analysis concludes "no" (invalid
// certificate, failed check, diverged run); 1 on malformed input or any
// other error.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qnewt/qnewt.hpp"

namespace {

using nlohmann::ordered_json;
using namespace qnewt;

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kCheckFailed = 2;

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

ordered_json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open config: " + path);
  ordered_json cfg;
  try {
    cfg = ordered_json::parse(in);
  } catch (const std::exception& e) {
    fail(ErrorCode::config_error, "config " + path + ": " + e.what());
  }
  if (!cfg.is_object()) fail(ErrorCode::config_error, "config root must be a JSON object");
  return cfg;
}

ordered_json parse_point_spec(const std::string& text) {
  try {
    return ordered_json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::config_error, std::string("point spec: ") + e.what());
  }
}

Vector parse_vector(const ordered_json& j) {
  if (!j.is_array() || j.empty())
    fail(ErrorCode::config_error, "expected a non-empty numeric array point");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Matrix parse_matrix(const ordered_json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    fail(ErrorCode::config_error, "expected an array-of-arrays matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      fail(ErrorCode::config_error, "ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

ordered_json vector_to_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

TreePoint parse_tree_point(const ordered_json& j, const TreeCubicalComplex& space) {
  if (j.is_object() && j.contains("t"))
    return space.path_point(j.at("t").get<double>());
  if (!j.is_object() || !j.contains("node") || !j.contains("x"))
    fail(ErrorCode::config_error, "tree point spec needs {node, x} or {t}");
  const auto id = j.at("node").get<std::int64_t>();
  return space.canonical(
      TreePoint{space.tree().index_of_id(id), j.at("x").get<double>()});
}

ordered_json tree_point_to_json(const TreeCubicalComplex& space, const TreePoint& p) {
  const TreePoint c = space.canonical(p);
  ordered_json j;
  j["node"] = space.tree().node(c.node).id;
  j["x"] = c.x;
  return j;
}

// ---------------------------------------------------------------------------
// Spaces and objective registry
// ---------------------------------------------------------------------------

struct EuclideanProblem {
  std::string name;
  int n = 1;
  std::function<Vector(const Vector&)> f;
  NewtonDifferential<EuclideanSpace> hf;
  std::optional<Vector> reference;
};

EuclideanProblem euclidean_problem(const ordered_json& obj) {
  EuclideanProblem p;
  p.name = obj.value("name", "");
  if (p.name == "cubic_minus_two") {
    p.n = 1;
    p.f = [](const Vector& x) {
      Vector v(1);
      v[0] = x[0] * x[0] * x[0] - 2.0;
      return v;
    };
    p.hf = euclidean_bundle(
        [](const Vector& x) {
          Matrix j(1, 1);
          j(0, 0) = 3.0 * x[0] * x[0];
          return j;
        },
        1);
    p.reference = scalar_point(std::cbrt(2.0));
  } else if (p.name == "square_minus_one") {
    p.n = 1;
    p.f = [](const Vector& x) {
      Vector v(1);
      v[0] = x[0] * x[0] - 1.0;
      return v;
    };
    p.hf = euclidean_bundle(
        [](const Vector& x) {
          Matrix j(1, 1);
          j(0, 0) = 2.0 * x[0];
          return j;
        },
        1);
    p.reference = scalar_point(1.0);
  } else if (p.name == "linear") {
    const Matrix t = parse_matrix(obj.at("T"));
    const Vector xbar = parse_vector(obj.at("xbar"));
    if (t.rows() != xbar.size())
      fail(ErrorCode::config_error, "linear objective: T and xbar dimensions differ");
    p.n = static_cast<int>(t.rows());
    p.f = [t, xbar](const Vector& x) -> Vector { return t * (x - xbar); };
    p.hf = euclidean_bundle([t](const Vector&) { return t; }, p.n);
    p.reference = xbar;
  } else if (p.name == "system_2d") {
    p.n = 2;
    p.f = [](const Vector& x) {
      Vector v(2);
      v[0] = x[0] * x[0] - x[1];
      v[1] = x[1] * x[1] - x[0];
      return v;
    };
    p.hf = euclidean_bundle(
        [](const Vector& x) {
          Matrix j(2, 2);
          j(0, 0) = 2.0 * x[0];
          j(0, 1) = -1.0;
          j(1, 0) = -1.0;
          j(1, 1) = 2.0 * x[1];
          return j;
        },
        2);
    Vector ref(2);
    ref << 1.0, 1.0;
    p.reference = ref;
  } else {
    fail(ErrorCode::config_error, "unknown euclidean objective: '" + p.name + "'");
  }
  return p;
}

struct BanachProblem {
  std::string name;
  std::function<std::vector<Vector>(const Vector&)> images;
  std::optional<Vector> reference;
};

BanachProblem banach_problem(const ordered_json& obj, Eigen::Index dim) {
  BanachProblem p;
  p.name = obj.value("name", "");
  if (p.name == "contraction_half") {
    p.images = [](const Vector& x) { return std::vector<Vector>{x / 2.0}; };
  } else if (p.name == "contraction_half_third") {
    p.images = [](const Vector& x) { return std::vector<Vector>{x / 2.0, x / 3.0}; };
  } else {
    fail(ErrorCode::config_error, "unknown set-valued objective: '" + p.name + "'");
  }
  p.reference = Vector::Zero(dim);
  return p;
}

struct TreeProblem {
  std::string name;
  TreeObjective obj;
  std::function<Vector(const TreePoint&)> f;
  NewtonDifferential<TreeCubicalComplex> hf;
  std::optional<TreePoint> reference;
};

TreeProblem tree_problem(const ordered_json& objcfg,
                         std::shared_ptr<const TreeCubicalComplex> space) {
  TreeProblem p;
  p.name = objcfg.value("name", "");
  double root_param = -1.0;
  if (p.name == "exp_linear") {
    const double a = objcfg.value("a", 2.0);
    if (!(a > 0.0)) fail(ErrorCode::config_error, "exp_linear needs a > 0");
    p.obj = exp_linear_objective(a);
    root_param = std::log(a);
  } else if (p.name == "quadratic") {
    if (!objcfg.contains("center"))
      fail(ErrorCode::config_error, "quadratic objective needs a center");
    const double center = objcfg.at("center").get<double>();
    p.obj = quadratic_objective(center);
    root_param = center;
  } else {
    fail(ErrorCode::config_error, "unknown tree objective: '" + p.name + "'");
  }
  p.f = tree_objective_map(space, p.obj);
  p.hf = tree_differential(space, p.obj);
  if (root_param >= 0.0 && root_param <= space->max_anchor_distance())
    p.reference = space->path_point(root_param);
  return p;
}

std::shared_ptr<const TreeCubicalComplex> make_tree_space(const ordered_json& sp) {
  const std::string kind = sp.value("kind", "");
  BinaryTree tree;
  if (kind == "tree") {
    if (!sp.contains("tree")) fail(ErrorCode::config_error, "tree space needs a 'tree' object");
    tree = tree_from_json(sp.at("tree"));
  } else if (kind == "tree_random") {
    tree = random_full_binary_tree(sp.value("max_depth", 4),
                                   sp.value("tree_seed", std::uint64_t{7}));
  } else {
    fail(ErrorCode::config_error, "unknown tree space kind: '" + kind + "'");
  }
  return std::make_shared<const TreeCubicalComplex>(std::move(tree));
}

// ---------------------------------------------------------------------------
// Shared report pieces
// ---------------------------------------------------------------------------

template <class S>
SolveConfig<S> parse_solver_config(const ordered_json& cfg) {
  SolveConfig<S> sc;
  if (!cfg.contains("solver")) return sc;
  const auto& s = cfg.at("solver");
  sc.max_iters = s.value("max_iters", sc.max_iters);
  sc.residual_tol = s.value("residual_tol", sc.residual_tol);
  sc.step_tol = s.value("step_tol", sc.step_tol);
  sc.divergence_factor = s.value("divergence_factor", sc.divergence_factor);
  sc.divergence_window = s.value("divergence_window", sc.divergence_window);
  if (s.contains("selection")) {
    const auto& sel = s.at("selection");
    if (sel.is_string()) {
      const std::string name = sel.get<std::string>();
      if (name == "first")
        sc.selection.kind = SelectionPolicy::Kind::first;
      else if (name == "min_residual_lookahead")
        sc.selection.kind = SelectionPolicy::Kind::min_residual_lookahead;
      else
        fail(ErrorCode::config_error, "unknown selection policy: '" + name + "'");
    } else if (sel.is_object() && sel.contains("index")) {
      sc.selection.kind = SelectionPolicy::Kind::index;
      sc.selection.index = sel.at("index").get<std::size_t>();
    } else {
      fail(ErrorCode::config_error, "selection must be a policy name or {index: k}");
    }
  }
  return sc;
}

ordered_json rate_json(const TraceAnalysis& analysis) {
  const RateReport& r = analysis.report;
  ordered_json j;
  j["classification"] = to_string(r.classification);
  j["c_estimates"] = r.c_estimates;
  if (r.gamma_estimate) j["gamma_estimate"] = *r.gamma_estimate;
  if (r.c_bound) j["c_bound"] = *r.c_bound;
  j["used_entries"] = r.used_entries;
  j["tail_start"] = r.tail_start;
  j["note"] = r.note;
  j["used_step_proxy"] = analysis.used_step_proxy;
  j["insufficient"] = analysis.insufficient;
  return j;
}

ordered_json trace_row_json(const TraceRow& row) {
  ordered_json j;
  j["k"] = row.k;
  j["residual_norm"] = row.residual_norm;
  if (row.step_dist) j["step_dist"] = *row.step_dist;
  if (row.dist_to_ref) j["dist_to_ref"] = *row.dist_to_ref;
  if (row.t_k) j["t_k"] = *row.t_k;
  if (row.f_t_over_B) j["f_t_over_B"] = *row.f_t_over_B;
  if (row.selection_index) j["selection_index"] = *row.selection_index;
  return j;
}

void write_trace_file(const std::string& path, const std::string& format,
                      const TraceTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_error, "cannot open output file: " + path);
  if (format == "csv") {
    write_trace_csv(out, table);
  } else if (format == "json") {
    ordered_json j;
    j["schema"] = "qnewt/1";
    auto& rows = j["rows"] = ordered_json::array();
    for (const auto& row : table.rows) rows.push_back(trace_row_json(row));
    out << j.dump(2) << '\n';
  } else {
    fail(ErrorCode::config_error, "unknown output format: '" + format + "'");
  }
  if (!out) fail(ErrorCode::io_error, "write failed: " + path);
}

struct OutputSpec {
  std::optional<std::string> path;
  std::string format = "csv";
};

OutputSpec resolve_output(const ordered_json& cfg, const std::string& out_flag) {
  OutputSpec spec;
  if (cfg.contains("output")) {
    const auto& o = cfg.at("output");
    if (o.contains("path")) spec.path = o.at("path").get<std::string>();
    spec.format = o.value("format", spec.format);
  }
  if (!out_flag.empty()) spec.path = out_flag;
  return spec;
}

std::uint64_t resolve_seed(const ordered_json& cfg, std::uint64_t flag_value,
                           bool flag_given) {
  if (flag_given) return flag_value;
  return cfg.value("seed", std::uint64_t{42});
}

void emit(const ordered_json& report) { std::cout << report.dump(2) << '\n'; }

// ---------------------------------------------------------------------------
// solve (and banach runs)
// ---------------------------------------------------------------------------

template <QuasiMetricSpace S, class PointJson>
void finish_solve_report(ordered_json& report, const S& space, const IterationTrace<S>& trace,
                         const OutputSpec& output, PointJson&& point_json) {
  (void)space;
  report["stop_reason"] = to_string(trace.stop_reason);
  report["iterations"] = trace.step_dists.size();
  report["final_residual"] = trace.residual_norms.back();
  report["final_point"] = point_json(trace.points.back());
  report["rate"] = rate_json(analyze_trace(trace));
  const TraceTable table = make_trace_table(trace);
  report["trace_rows"] = table.rows.size();
  if (output.path) {
    write_trace_file(*output.path, output.format, table);
    report["output_path"] = *output.path;
    report["output_format"] = output.format;
  }
}

int cmd_solve(const std::string& config_path, const std::string& out_flag,
              std::uint64_t /*seed*/) {
  const ordered_json cfg = load_config(config_path);
  const std::string run = cfg.value("run", "solve");
  if (run != "solve" && run != "banach")
    fail(ErrorCode::config_error,
         "config requests run '" + run + "'; the solve command handles solve and banach");
  const auto& sp = cfg.at("space");
  const std::string kind = sp.value("kind", "euclidean");
  const OutputSpec output = resolve_output(cfg, out_flag);

  ordered_json report;
  report["schema"] = "qnewt/1";
  report["command"] = "solve";
  report["run"] = run;
  report["space"] = sp;
  report["objective"] = cfg.at("objective").value("name", "");

  int code = kOk;
  if (kind == "euclidean") {
    const Vector x0 = parse_vector(cfg.at("x0"));
    EuclideanSpace space{static_cast<int>(x0.size())};
    auto point_json = [](const Vector& v) { return vector_to_json(v); };
    if (run == "banach") {
      const BanachProblem bp = banach_problem(cfg.at("objective"), x0.size());
      const auto sc = parse_solver_config<EuclideanSpace>(cfg);
      BanachSelection policy = BanachSelection::first;
      if (cfg.contains("solver") && cfg.at("solver").value("policy", "") == "nearest_to_previous")
        policy = BanachSelection::nearest_to_previous;
      IterationTrace<EuclideanSpace> trace =
          banach_iterate(space, bp.images, x0, sc.max_iters, sc.step_tol, policy);
      std::optional<Vector> ref = bp.reference;
      if (cfg.contains("reference")) ref = parse_vector(cfg.at("reference"));
      if (ref) {
        trace.dists_to_ref.emplace();
        for (const auto& p : trace.points)
          trace.dists_to_ref->push_back(space.distance(p, *ref));
      }
      finish_solve_report(report, space, trace, output, point_json);
    } else {
      const EuclideanProblem ep = euclidean_problem(cfg.at("objective"));
      if (static_cast<int>(x0.size()) != ep.n)
        fail(ErrorCode::config_error, "x0 dimension does not match the objective");
      auto sc = parse_solver_config<EuclideanSpace>(cfg);
      sc.reference_root = ep.reference;
      if (cfg.contains("reference")) sc.reference_root = parse_vector(cfg.at("reference"));
      const IterationTrace<EuclideanSpace> trace = newton_solve(space, ep.f, ep.hf, x0, sc);
      if (trace.stop_reason == StopReason::diverged ||
          trace.stop_reason == StopReason::no_selection ||
          trace.stop_reason == StopReason::no_inverse)
        code = kCheckFailed;
      finish_solve_report(report, space, trace, output, point_json);
    }
  } else if (kind == "tree" || kind == "tree_random") {
    auto space = make_tree_space(sp);
    if (run == "banach")
      fail(ErrorCode::config_error, "set-valued objectives are euclidean-only");
    const TreeProblem tp = tree_problem(cfg.at("objective"), space);
    const TreePoint x0 = parse_tree_point(cfg.at("x0"), *space);
    auto sc = parse_solver_config<TreeCubicalComplex>(cfg);
    sc.reference_root = tp.reference;
    if (cfg.contains("reference")) sc.reference_root = parse_tree_point(cfg.at("reference"), *space);
    const auto trace = newton_solve(*space, tp.f, tp.hf, x0, sc);
    if (trace.stop_reason == StopReason::diverged ||
        trace.stop_reason == StopReason::no_selection ||
        trace.stop_reason == StopReason::no_inverse)
      code = kCheckFailed;
    report["tree_nodes"] = space->tree().size();
    report["tree_depth"] = space->tree().max_depth();
    auto point_json = [&space](const TreePoint& p) { return tree_point_to_json(*space, p); };
    finish_solve_report(report, *space, trace, output, point_json);
  } else {
    fail(ErrorCode::config_error, "unknown space kind: '" + kind + "'");
  }
  emit(report);
  return code;
}

// ---------------------------------------------------------------------------
// check-space
// ---------------------------------------------------------------------------

int cmd_check_space(const std::string& config_path, std::uint64_t seed, bool seed_given) {
  const ordered_json cfg = load_config(config_path);
  const auto& sp = cfg.at("space");
  const std::string kind = sp.value("kind", "euclidean");
  const auto triples = cfg.value("triples", std::size_t{10000});
  const double tol = cfg.value("tolerance", 1e-12);
  const std::uint64_t effective_seed = resolve_seed(cfg, seed, seed_given);

  AxiomReport axioms;
  ordered_json report;
  report["schema"] = "qnewt/1";
  report["command"] = "check_space";
  report["space"] = sp;
  if (kind == "euclidean") {
    const int dim = sp.value("dim", 1);
    if (dim < 1) fail(ErrorCode::config_error, "euclidean dim must be >= 1");
    EuclideanSpace space{dim};
    axioms = check_axioms(
        space, [dim](Rng& rng) { return detail::gaussian_vector(dim, rng); }, triples, tol,
        effective_seed);
  } else if (kind == "tree" || kind == "tree_random") {
    auto space = make_tree_space(sp);
    report["tree_nodes"] = space->tree().size();
    report["tree_depth"] = space->tree().max_depth();
    axioms = check_axioms(
        *space, [&space](Rng& rng) { return space->sample_uniform(rng); }, triples, tol,
        effective_seed);
  } else {
    fail(ErrorCode::config_error, "unknown space kind: '" + kind + "'");
  }
  report["seed"] = effective_seed;
  report["triples"] = axioms.triples;
  report["violations"] = axioms.violations;
  report["worst_triangle_slack"] = axioms.worst_triangle_slack;
  report["worst_self_distance"] = axioms.worst_self_distance;
  report["worst_negative_distance"] = axioms.worst_negative_distance;
  if (!axioms.first_violation.empty()) report["first_violation"] = axioms.first_violation;
  report["passed"] = axioms.passed();
  emit(report);
  return axioms.passed() ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------
// check-differential
// ---------------------------------------------------------------------------

ordered_json diffability_json(const DiffabilityReport& rep) {
  ordered_json j;
  j["mode"] = to_string(rep.mode);
  j["gamma"] = rep.gamma;
  j["limit_estimate"] = rep.limit_estimate;
  auto& shells = j["shells"] = ordered_json::array();
  for (const auto& s : rep.shells) {
    ordered_json e;
    e["radius"] = s.radius;
    e["sup_ratio"] = s.sup_ratio;
    e["samples"] = s.samples;
    shells.push_back(e);
  }
  j["note"] = rep.note;
  return j;
}

int cmd_check_differential(const std::string& config_path, const std::string& at_flag,
                           double gamma, bool gamma_given, std::uint64_t seed,
                           bool seed_given) {
  const ordered_json cfg = load_config(config_path);
  const auto& sp = cfg.at("space");
  const std::string kind = sp.value("kind", "euclidean");

  PointwiseOptions opts;
  opts.gamma = gamma_given ? gamma : cfg.value("gamma", 1.0);
  opts.seed = resolve_seed(cfg, seed, seed_given);
  opts.base_scale = cfg.value("base_scale", 1.0);
  opts.samples_per_radius = cfg.value("samples_per_radius", std::size_t{32});

  ordered_json at_spec;
  if (!at_flag.empty())
    at_spec = parse_point_spec(at_flag);
  else if (cfg.contains("at"))
    at_spec = cfg.at("at");
  else
    fail(ErrorCode::config_error, "check-differential needs --at or a config 'at' point");

  ordered_json report;
  report["schema"] = "qnewt/1";
  report["command"] = "check_differential";
  report["space"] = sp;
  report["objective"] = cfg.at("objective").value("name", "");

  DiffabilityReport rep;
  if (kind == "euclidean") {
    const EuclideanProblem ep = euclidean_problem(cfg.at("objective"));
    EuclideanSpace space{ep.n};
    const Vector at = parse_vector(at_spec);
    report["at"] = vector_to_json(at);
    rep = check_pointwise_diffability(space, ep.f, ep.hf, at, opts);
  } else if (kind == "tree" || kind == "tree_random") {
    auto space = make_tree_space(sp);
    const TreeProblem tp = tree_problem(cfg.at("objective"), space);
    const TreePoint at = parse_tree_point(at_spec, *space);
    report["at"] = tree_point_to_json(*space, at);
    report["tree_nodes"] = space->tree().size();
    rep = check_pointwise_diffability(*space, tp.f, tp.hf, at, opts);
  } else {
    fail(ErrorCode::config_error, "unknown space kind: '" + kind + "'");
  }
  report["seed"] = opts.seed;
  report["result"] = diffability_json(rep);
  const bool ok = rep.mode != DiffabilityMode::inconclusive;
  report["passed"] = ok;
  emit(report);
  return ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------
// kantorovich
// ---------------------------------------------------------------------------

ordered_json condition_json(const ConditionCheck& c) {
  ordered_json j;
  j["holds"] = c.holds;
  j["worst_margin"] = c.worst_margin;
  j["worst_t"] = c.worst_t;
  return j;
}

ordered_json certificate_json(const MajorantCertificate& cert) {
  ordered_json j;
  j["valid"] = cert.valid;
  if (cert.failing_index)
    j["failing_index"] = *cert.failing_index;
  else
    j["failing_index"] = nullptr;
  ordered_json checks;
  checks["a"] = condition_json(cert.condition_checks.a);
  checks["b"] = condition_json(cert.condition_checks.b);
  checks["c"] = condition_json(cert.condition_checks.c);
  checks["d"] = condition_json(cert.condition_checks.d);
  checks["grid"] = cert.condition_checks.grid;
  j["condition_checks"] = checks;
  j["t_sequence"] = cert.t_sequence;
  j["sigma_membership"] = cert.sigma_membership;
  j["step_bound_margins"] = cert.step_bound_margins;
  j["anchor_bound_margins"] = cert.anchor_bound_margins;
  auto& residuals = j["residual_bounds"] = ordered_json::array();
  for (const auto& rb : cert.residual_bounds) {
    ordered_json e;
    e["residual"] = rb.residual;
    e["bound"] = rb.bound;
    e["applicable"] = rb.applicable;
    residuals.push_back(e);
  }
  if (!cert.t_sequence.empty())
    j["cauchy_bound_total"] = cert.t_sequence.back() - cert.t_sequence.front();
  j["domain_check_defaulted"] = cert.domain_check_defaulted;
  j["tol"] = cert.tol;
  return j;
}

/// Constants measured around x0 before the majorant is built.
struct MeasuredConstants {
  double eta = 0.0;
  double l = 0.0;
  double b_measured = 0.0;
  double b_used = 1.0;
};

template <QuasiMetricSpace S, class F, class PairSampler>
MeasuredConstants measure_constants(
    const S& space, F&& f, const std::function<Selection<S>(const typename S::Point&)>& h_at,
    const typename S::Point& x0, PairSampler&& sample_pair, std::size_t samples,
    std::uint64_t seed) {
  MeasuredConstants mc;
  mc.eta = measure_eta(space, f, h_at(x0), x0);
  Rng rng(seed);
  std::vector<std::pair<typename S::Point, typename S::Point>> pairs;
  pairs.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) pairs.push_back(sample_pair(rng));
  mc.l = estimate_smoothness_L(space, f, h_at, pairs, 2.0);
  mc.b_measured = estimate_B(space, h_at(x0), pairs);
  mc.b_used = std::max(1.0, mc.b_measured);
  return mc;
}

template <QuasiMetricSpace S, class F, class PointJson>
int run_kantorovich(ordered_json& report, const S& space, F&& f,
                    const std::function<Selection<S>(const typename S::Point&)>& h_at,
                    const typename S::Point& x0, const MeasuredConstants& mc,
                    const SolveConfig<S>& sc, const OutputSpec& output,
                    PointJson&& point_json) {
  report["x0"] = point_json(x0);
  ordered_json constants;
  constants["eta"] = mc.eta;
  constants["L"] = mc.l;
  constants["B_measured"] = mc.b_measured;
  constants["B_used"] = mc.b_used;
  constants["gamma"] = 2.0;
  constants["two_l_b_eta"] = 2.0 * mc.l * mc.b_used * mc.eta;
  report["constants"] = constants;

  if (2.0 * mc.l * mc.b_used * mc.eta > 1.0) {
    report["valid"] = false;
    report["reason"] = "quadratic majorant inapplicable: 2LB*eta > 1";
    emit(report);
    return kCheckFailed;
  }
  const Majorant majorant = quadratic_majorant(mc.l, mc.b_used, mc.eta);
  report["t_bar"] = majorant.t_bar;
  report["majorant_family"] = majorant.family;

  const CertifiedRun<S> run = run_certified_newton(space, f, h_at, x0, majorant, sc);
  report["stop_reason"] = to_string(run.trace.stop_reason);
  report["iterations"] = run.trace.step_dists.size();
  report["final_residual"] = run.trace.residual_norms.back();
  report["final_point"] = point_json(run.trace.points.back());
  report["certificate"] = certificate_json(run.certificate);
  report["valid"] = run.certificate.valid;

  const TraceTable table = make_trace_table(run.trace, &run.certificate);
  report["trace_rows"] = table.rows.size();
  if (output.path) {
    write_trace_file(*output.path, output.format, table);
    report["output_path"] = *output.path;
    report["output_format"] = output.format;
  }
  emit(report);
  return run.certificate.valid ? kOk : kCheckFailed;
}

int cmd_kantorovich(const std::string& config_path, const std::string& x0_flag,
                    const std::string& out_flag, std::uint64_t seed, bool seed_given) {
  const ordered_json cfg = load_config(config_path);
  const auto& sp = cfg.at("space");
  const std::string kind = sp.value("kind", "euclidean");
  const OutputSpec output = resolve_output(cfg, out_flag);
  const std::uint64_t effective_seed = resolve_seed(cfg, seed, seed_given);
  const auto samples = cfg.value("samples", std::size_t{256});
  const double sample_radius = cfg.value("sample_radius", 1.0);

  ordered_json x0_spec;
  if (!x0_flag.empty())
    x0_spec = parse_point_spec(x0_flag);
  else if (cfg.contains("x0"))
    x0_spec = cfg.at("x0");
  else
    fail(ErrorCode::config_error, "kantorovich needs --x0 or a config 'x0' point");

  ordered_json report;
  report["schema"] = "qnewt/1";
  report["command"] = "kantorovich";
  report["space"] = sp;
  report["objective"] = cfg.at("objective").value("name", "");
  report["seed"] = effective_seed;
  report["samples"] = samples;

  if (kind == "euclidean") {
    const EuclideanProblem ep = euclidean_problem(cfg.at("objective"));
    EuclideanSpace space{ep.n};
    const Vector x0 = parse_vector(x0_spec);
    if (static_cast<int>(x0.size()) != ep.n)
      fail(ErrorCode::config_error, "x0 dimension does not match the objective");
    std::function<Selection<EuclideanSpace>(const Vector&)> h_at =
        [hf = ep.hf](const Vector& x) { return hf.selections_at(x)[0]; };
    auto sample_pair = [&space, &x0, sample_radius](Rng& rng) {
      std::uniform_real_distribution<double> radius(0.0, sample_radius);
      const Vector x = space.sample_at_distance(x0, radius(rng), rng);
      const Vector y = space.sample_at_distance(x, radius(rng), rng);
      return std::make_pair(x, y);
    };
    const MeasuredConstants mc =
        measure_constants(space, ep.f, h_at, x0, sample_pair, samples, effective_seed);
    auto sc = parse_solver_config<EuclideanSpace>(cfg);
    sc.reference_root = ep.reference;
    return run_kantorovich(report, space, ep.f, h_at, x0, mc, sc, output,
                           [](const Vector& v) { return vector_to_json(v); });
  }
  if (kind == "tree" || kind == "tree_random") {
    auto space = make_tree_space(sp);
    const TreeProblem tp = tree_problem(cfg.at("objective"), space);
    const TreePoint x0 = parse_tree_point(x0_spec, *space);
    report["tree_nodes"] = space->tree().size();
    std::function<Selection<TreeCubicalComplex>(const TreePoint&)> h_at =
        [hf = tp.hf](const TreePoint& p) { return hf.selections_at(p)[0]; };
    // Constants are measured along the distinguished path, where the
    // quasi-inverse axioms hold exactly.
    auto sample_pair = [&space](Rng& rng) {
      return std::make_pair(sample_on_path(*space, rng), sample_on_path(*space, rng));
    };
    const MeasuredConstants mc =
        measure_constants(*space, tp.f, h_at, x0, sample_pair, samples, effective_seed);
    auto sc = parse_solver_config<TreeCubicalComplex>(cfg);
    sc.reference_root = tp.reference;
    return run_kantorovich(report, *space, tp.f, h_at, x0, mc, sc, output,
                           [&space](const TreePoint& p) { return tree_point_to_json(*space, p); });
  }
  fail(ErrorCode::config_error, "unknown space kind: '" + kind + "'");
}

// ---------------------------------------------------------------------------
// rates
// ---------------------------------------------------------------------------

int cmd_rates(const std::string& trace_path) {
  std::ifstream in(trace_path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open trace: " + trace_path);
  const TraceTable table = read_trace_csv(in);
  const TraceAnalysis analysis = analyze_table(table);
  ordered_json report;
  report["schema"] = "qnewt/1";
  report["command"] = "rates";
  report["rows"] = table.rows.size();
  report["rate"] = rate_json(analysis);
  emit(report);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Newton-type root finding on quasi-metric spaces"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "Upper bound on worker threads (execution is currently sequential)");

  std::string config_path, out_flag, at_flag, x0_flag, trace_path;
  std::uint64_t seed = 42;
  double gamma = 1.0;

  CLI::App* solve = app.add_subcommand("solve", "Run a Newton or fixed-point iteration");
  solve->add_option("--config", config_path, "Experiment config (JSON)")->required();
  CLI::Option* solve_seed = solve->add_option("--seed", seed, "Sampling seed (default 42)");
  solve->add_option("--out", out_flag, "Trace output path (overrides config)");

  CLI::App* check_space = app.add_subcommand("check-space", "Quasi-metric axiom suite");
  check_space->add_option("--config", config_path, "Experiment config (JSON)")->required();
  CLI::Option* cs_seed = check_space->add_option("--seed", seed, "Sampling seed (default 42)");

  CLI::App* check_diff =
      app.add_subcommand("check-differential", "Pointwise differentiability check");
  check_diff->add_option("--config", config_path, "Experiment config (JSON)")->required();
  check_diff->add_option("--at", at_flag, "Base point spec (JSON)");
  CLI::Option* cd_gamma = check_diff->add_option("--gamma", gamma, "Remainder exponent");
  CLI::Option* cd_seed = check_diff->add_option("--seed", seed, "Sampling seed (default 42)");

  CLI::App* kant = app.add_subcommand("kantorovich", "Existence certificate run");
  kant->add_option("--config", config_path, "Experiment config (JSON)")->required();
  kant->add_option("--x0", x0_flag, "Starting point spec (JSON)");
  kant->add_option("--out", out_flag, "Trace output path (overrides config)");
  CLI::Option* k_seed = kant->add_option("--seed", seed, "Sampling seed (default 42)");

  CLI::App* rates = app.add_subcommand("rates", "Classify a written trace");
  rates->add_option("--trace", trace_path, "Trace CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }

  try {
    if (*solve) return cmd_solve(config_path, out_flag, seed);
    if (*check_space) return cmd_check_space(config_path, seed, cs_seed->count() > 0);
    if (*check_diff)
      return cmd_check_differential(config_path, at_flag, gamma, cd_gamma->count() > 0, seed,
                                    cd_seed->count() > 0);
    if (*kant) return cmd_kantorovich(config_path, x0_flag, out_flag, seed, k_seed->count() > 0);
    if (*rates) return cmd_rates(trace_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
  (void)solve_seed;
  return kError;
}
