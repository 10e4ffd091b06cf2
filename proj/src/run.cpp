#include "qbsde/run.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "qbsde/battery.hpp"
#include "qbsde/bmo.hpp"
#include "qbsde/constants.hpp"
#include "qbsde/error.hpp"
#include "qbsde/registry.hpp"

namespace qbsde {

using json = nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Long doubles outside the double range are written as decimal strings.
json ld(long double v) {
  const double d = static_cast<double>(v);
  if (std::isfinite(d) && (v == 0 || std::abs(d) >= DBL_MIN)) return d;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.18Lg", v);
  return std::string(buf);
}

json num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json vec(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

const char* mode_name(SolveMode m) { return m == SolveMode::kCertified ? "certified" : "working"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json structural_json(const StructuralConstants& s) {
  return {{"C", s.C}, {"gamma", s.gamma}, {"alpha", s.alpha}, {"n", s.n},
          {"d", s.d}, {"T", s.T},         {"xi_bound", s.xi_bound}};
}

json ledger_json(const LocalSolveParameters& p) {
  const char* binding = p.epsilon_binding == EpsilonBinding::kLipschitzCap     ? "lipschitz-cap"
                        : p.epsilon_binding == EpsilonBinding::kExponentialCap ? "exponential-cap"
                                                                               : "override";
  return {{"delta", ld(p.delta)},
          {"beta", ld(p.beta)},
          {"mu1", ld(p.mu1)},
          {"mu2", ld(p.mu2)},
          {"mu", ld(p.mu)},
          {"C_delta", ld(p.C_delta)},
          {"log_C_delta", ld(p.log_C_delta)},
          {"epsilon", ld(p.epsilon)},
          {"epsilon_max", ld(p.epsilon_max)},
          {"epsilon_lipschitz_cap", ld(p.epsilon_lipschitz_cap)},
          {"epsilon_exponential_cap", ld(p.epsilon_exponential_cap)},
          {"epsilon_binding", binding},
          {"Delta", ld(p.Delta)},
          {"A", ld(p.A)},
          {"one_minus_delta_A", ld(1 - p.delta * p.A)},
          {"balance_lhs", ld(p.balance_lhs())},
          {"balance_rhs", ld(p.balance_rhs())},
          {"quadratic_relative_residual", ld(p.quadratic_relative_residual())},
          {"balance_relative_error", ld(p.balance_relative_error())},
          {"log_ball_u_bound", ld(p.log_ball_u_bound())}};
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)))];
}

std::string solution_csv(const AdaptedField& Y, const AdaptedField& Z, const TimeGrid& grid,
                         std::size_t n, std::size_t d) {
  std::ostringstream os;
  os << "node,t,component,y_mean,y_q05,y_q50,y_q95,z_norm_mean,z_norm_max\n";
  const std::size_t P = Y.num_paths();
  for (std::size_t k = 0; k < Y.num_nodes(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> y = Y.component(k, i);
      double mean = 0.0;
      for (double v : y) mean += v;
      mean /= static_cast<double>(P);
      double zmean = 0.0;
      double zmax = 0.0;
      for (std::size_t p = 0; p < P; ++p) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += Z(k, p, i * d + c) * Z(k, p, i * d + c);
        s = std::sqrt(s);
        zmean += s;
        zmax = std::max(zmax, s);
      }
      zmean /= static_cast<double>(P);
      os << k << ',' << fmt(grid.time(k)) << ',' << i + 1 << ',' << fmt(mean) << ','
         << fmt(quantile(y, 0.05)) << ',' << fmt(quantile(y, 0.5)) << ',' << fmt(quantile(y, 0.95))
         << ',' << fmt(zmean) << ',' << fmt(zmax) << '\n';
    }
  }
  return os.str();
}

void trace_rows(std::ostringstream& os, const IterationTrace& trace, const std::string& prefix) {
  for (const IterationRecord& r : trace.records) {
    os << prefix << r.iteration << ',' << fmt(r.y_dist_sup) << ',' << fmt(r.z_dist_bmo) << ','
       << fmt(r.ratio) << ',' << (r.in_ball ? 1 : 0) << '\n';
  }
}

json trace_json(const IterationTrace& trace) {
  json a = json::array();
  for (const IterationRecord& r : trace.records) {
    a.push_back({{"iteration", r.iteration},
                 {"y_dist_sup", num(r.y_dist_sup)},
                 {"z_dist_bmo", num(r.z_dist_bmo)},
                 {"ratio", num(r.ratio)},
                 {"in_ball", r.in_ball},
                 {"v_margin", num(r.membership.v_margin)},
                 {"log_u_margin", num(r.membership.log_u_margin)}});
  }
  return a;
}

// Geometric mean of the recorded contraction ratios.
double mean_ratio(const IterationTrace& trace) {
  double s = 0.0;
  std::size_t m = 0;
  for (const IterationRecord& r : trace.records) {
    if (std::isfinite(r.ratio) && r.ratio > 0.0) {
      s += std::log(r.ratio);
      ++m;
    }
  }
  return m ? std::exp(s / static_cast<double>(m)) : std::nan("");
}

json grid_json(const TimeGrid& g) {
  return {{"t0", g.t0()}, {"T", g.T()}, {"steps", g.steps()}, {"dt", g.dt()}};
}

struct Output {
  json summary;
  std::optional<std::string> trace;
  std::optional<std::string> solution;
  json grid;
  bool ok = true;
};

Output do_constants(const RunConfig& cfg, const ProblemInstance& inst) {
  const StructuralConstants& s = inst.generator.structural();
  Output o;
  json& j = o.summary;
  j["command"] = "constants";
  j["instance"] = inst.name;
  j["structural"] = structural_json(s);
  const LocalSolveParameters p = local_parameters(s, cfg.epsilon);
  j["local"] = ledger_json(p);
  j["step2_y_bound"] = num(step2_y_bound(p, s));
  j["delta_alpha"] = num(delta_alpha(s.gamma, static_cast<double>(p.delta), s.alpha));
  if (s.alpha == 0.0) {
    const GlobalSolveParameters g = global_parameters(s);
    j["global"] = {{"lambda", num(g.lambda)},
                   {"eta_lambda", ld(g.eta_lambda)},
                   {"z_bmo_bound", num(g.z_bmo_bound)},
                   {"segments_needed", ld(std::ceil(static_cast<long double>(s.T) / g.eta_lambda))}};
  } else {
    j["global"] = nullptr;
  }
  return o;
}

double window_length(const RunConfig& cfg, const ProblemInstance& inst, json& j) {
  const StructuralConstants& s = inst.generator.structural();
  double certified = std::nan("");
  try {
    certified = static_cast<double>(local_parameters(s).epsilon);
    j["certified_epsilon"] = num(certified);
  } catch (const Error& e) {
    j["certified_epsilon"] = std::string("unavailable: ") + e.what();
  }
  double eps = 0.0;
  if (cfg.epsilon) {
    eps = *cfg.epsilon;
  } else if (cfg.mode == SolveMode::kCertified) {
    if (!(certified > 0.0)) {
      throw InvalidArgument("certified epsilon is not representable as a window; use working mode");
    }
    eps = certified;
  } else {
    eps = inst.working_epsilon;
  }
  return std::min(eps, s.T);
}

LocalSolveOptions local_options(const RunConfig& cfg) {
  LocalSolveOptions lo;
  lo.tol = cfg.tol;
  lo.max_iter = cfg.max_iter;
  lo.certified = cfg.mode == SolveMode::kCertified;
  lo.gamma.basis = cfg.regression_basis();
  lo.gamma.track_se = true;
  return lo;
}

void add_closed_form(json& j, const ProblemInstance& inst, double horizon, const std::vector<double>& y0,
                     const std::vector<double>& se) {
  if (!inst.closed_form_y0) return;
  const std::vector<double> exact = inst.closed_form_y0(horizon);
  std::vector<double> z;
  bool within = true;
  for (std::size_t i = 0; i < exact.size() && i < y0.size(); ++i) {
    const double e = std::abs(y0[i] - exact[i]);
    z.push_back(se[i] > 0.0 ? e / se[i] : (e > 1e-12 ? INFINITY : 0.0));
    within = within && z.back() <= 3.0;
  }
  j["closed_form"] = {{"y0", vec(exact)}, {"error_in_se", vec(z)}, {"within_3se", within}};
}

Output do_solve_local(const RunConfig& cfg, const ProblemInstance& inst) {
  const SystemGenerator& gen = inst.generator;
  const StructuralConstants& s = gen.structural();
  Output o;
  json& j = o.summary;
  j["command"] = "solve-local";
  j["instance"] = inst.name;
  j["mode"] = mode_name(cfg.mode);
  const double eps = window_length(cfg, inst, j);
  j["epsilon"] = eps;
  const TimeGrid grid = make_grid(s.T - eps, s.T, cfg.steps);
  o.grid = grid_json(grid);
  const PathEnsemble ens = simulate_brownian(grid, cfg.paths, s.d, cfg.seed, 0.0);
  const TerminalValues term = evaluate_terminal(ens, inst.xi);

  LocalSolveResult res;
  try {
    res = local_solve(gen, term.values, ens, local_options(cfg));
  } catch (const ConvergenceError& e) {
    std::ostringstream os;
    os << "iteration,y_dist_sup,z_dist_bmo,ratio,in_ball\n";
    trace_rows(os, e.trace(), "");
    std::filesystem::create_directories(cfg.out_dir);
    write_text(std::filesystem::path(cfg.out_dir) / "trace.csv", os.str());
    throw;
  }
  const BsdeSolution& sol = res.solution;
  j["converged"] = true;
  j["iterations"] = res.iterations;
  j["tol"] = cfg.tol;
  j["y0"] = vec(sol.y0);
  j["y0_mc_se"] = vec(sol.y0_mc_se);
  j["y_sup"] = num(sol.y_sup);
  j["z_bmo_sq"] = num(sol.z_bmo_sq);
  j["cap_hits"] = sol.cap_hits;
  j["fixed_point_residual"] = num(res.fixed_point_residual);
  j["residual_within_2tol"] = res.fixed_point_residual <= 2.0 * cfg.tol;
  j["non_contraction"] = res.trace.non_contraction;
  j["mean_contraction_ratio"] = num(mean_ratio(res.trace));
  j["realized_xi_sup"] = num(term.sup_norm);
  j["certified_ledger"] = ledger_json(res.certified_params);
  j["step2_y_bound"] = num(step2_y_bound(res.certified_params, gen.with_xi_bound(std::max(s.xi_bound, term.sup_norm)).structural()));
  j["trace"] = trace_json(res.trace);
  if (std::abs(eps - s.T) < 1e-12) add_closed_form(j, inst, s.T, sol.y0, sol.y0_mc_se);
  o.ok = res.fixed_point_residual <= 2.0 * cfg.tol;

  std::ostringstream os;
  os << "iteration,y_dist_sup,z_dist_bmo,ratio,in_ball\n";
  trace_rows(os, res.trace, "");
  o.trace = os.str();
  o.solution = solution_csv(sol.Y, sol.Z, grid, gen.n(), gen.d());
  return o;
}

Output do_solve_global(const RunConfig& cfg, const ProblemInstance& inst) {
  const SystemGenerator& gen = inst.generator;
  const StructuralConstants& s = gen.structural();
  Output o;
  json& j = o.summary;
  j["command"] = "solve-global";
  j["instance"] = inst.name;
  j["mode"] = mode_name(cfg.mode);
  const TimeGrid grid = make_grid(0.0, s.T, cfg.steps);
  o.grid = grid_json(grid);
  const PathEnsemble ens = simulate_brownian(grid, cfg.paths, s.d, cfg.seed);

  GlobalSolveOptions go;
  go.mode = cfg.mode;
  go.segment_length = cfg.segment_length.value_or(inst.segment_length);
  go.eta_floor = cfg.eta_floor;
  go.local = local_options(cfg);
  const GlobalSolution sol = global_solve(gen, inst.xi, ens, go);

  j["segments"] = sol.plan.num_segments();
  j["segment_length"] = ld(sol.plan.eta);
  j["breakpoints"] = vec(sol.plan.breakpoints);
  j["lambda"] = num(sol.lambda);
  j["y0"] = vec(sol.y0);
  j["y0_mc_se"] = vec(sol.y0_mc_se);
  j["y_sup"] = num(sol.y_sup);
  j["y_sup_within_lambda"] = sol.y_sup <= sol.lambda;
  j["seam_jumps"] = vec(sol.seam_jumps);
  StructuralConstants sx = s;
  sx.xi_bound = std::max(s.xi_bound, evaluate_terminal(ens, inst.xi).sup_norm);
  const ZBmoReport zr = z_bmo_report(sol, sx);
  j["z_bmo"] = {{"estimate", num(zr.estimate)}, {"bound", num(zr.bound)}, {"slack", num(zr.slack)},
                {"holds", zr.holds}};
  json segs = json::array();
  std::ostringstream os;
  os << "segment,iteration,y_dist_sup,z_dist_bmo,ratio,in_ball\n";
  for (std::size_t k = 0; k < sol.segments.size(); ++k) {
    const SegmentReport& r = sol.segments[k];
    segs.push_back({{"first_node", r.first_node},
                    {"last_node", r.last_node},
                    {"iterations", r.iterations},
                    {"fixed_point_residual", num(r.fixed_point_residual)},
                    {"seam_y_sup", num(r.seam_y_sup)},
                    {"seam_lambda", num(r.seam_lambda)}});
    trace_rows(os, r.trace, std::to_string(k + 1) + ",");
  }
  j["segment_reports"] = segs;
  add_closed_form(j, inst, s.T, sol.y0, sol.y0_mc_se);
  // closed forms are reported only: on noise-free problems the time-step
  // bias dwarfs a zero standard error
  o.ok = zr.holds && sol.y_sup <= sol.lambda;
  if (cfg.uniqueness) {
    const PathEnsemble other = simulate_brownian(grid, cfg.paths, s.d, cfg.seed + 1);
    const UniquenessReport u = uniqueness_probe(gen, inst.xi, ens, other, go);
    j["uniqueness"] = {{"y_sup_distance", num(u.y_sup_distance)},
                       {"z_bmo_distance", num(u.z_bmo_distance)},
                       {"same_tolerance", num(u.same_tolerance)},
                       {"y0_seed_distance", num(u.y0_seed_distance)},
                       {"seed_tolerance", num(u.seed_tolerance)},
                       {"passes", u.passes}};
    o.ok = o.ok && u.passes;
  }
  o.trace = os.str();
  o.solution = solution_csv(sol.Y, sol.Z, grid, gen.n(), gen.d());
  return o;
}

json inequality_json(const InequalityReport& r) {
  json j{{"applicable", r.applicable}};
  if (!r.applicable) {
    j["reason"] = r.reason;
    return j;
  }
  j["bound"] = num(r.bound);
  j["worst_slack"] = num(r.worst_slack);
  j["worst_violation_se"] = num(r.worst_violation_se);
  j["holds"] = r.holds;
  return j;
}

json girsanov_json(const GirsanovReport& r) {
  json j{{"applicable", r.applicable}};
  if (!r.applicable) {
    j["reason"] = r.reason;
    return j;
  }
  const GirsanovBounds& b = r.bounds;
  j["norm_N"] = num(r.norm_N);
  j["norm_M"] = num(r.norm_M);
  j["norm_M_tilde"] = num(r.norm_M_tilde);
  j["ratio"] = num(r.ratio);
  j["ratio_se"] = num(r.ratio_se);
  j["c1"] = num(b.c1);
  j["c2"] = num(b.c2);
  j["p"] = num(b.p);
  j["c_p"] = num(b.c_p);
  j["K_bar"] = num(b.K_bar);
  j["p_bar"] = num(b.p_bar);
  j["c_p_bar"] = num(b.c_p_bar);
  j["L2_2q"] = num(b.L2_2q);
  j["L2_2q_bar"] = num(b.L2_2q_bar);
  j["within"] = r.within;
  return j;
}

Output do_verify_lemmas(const RunConfig& cfg) {
  BatteryOptions bo;
  bo.steps = cfg.steps;
  bo.paths = cfg.paths;
  bo.seed = cfg.seed;
  bo.count = cfg.battery_count;
  bo.basis = cfg.regression_basis();
  Output o;
  o.grid = grid_json(make_grid(0.0, bo.T, bo.steps));
  json& j = o.summary;
  j["command"] = "verify-lemmas";

  const ScalarBatteryResult sc = run_scalar_battery(bo);
  json ap = json::array();
  for (const auto& a : sc.a_priori) {
    ap.push_back({{"case", a.name},
                  {"max_violation_se", num(a.report.max_violation_se)},
                  {"worst_node", a.report.worst_node},
                  {"cap_hits", a.cap_hits},
                  {"holds", a.report.holds}});
  }
  json cmp = json::array();
  for (const auto& c : sc.comparisons) {
    cmp.push_back({{"case", c.name},
                   {"min_gap", num(c.report.min_gap)},
                   {"min_slack", num(c.report.min_slack)},
                   {"holds", c.report.holds}});
  }
  j["scalar"] = {{"a_priori", ap}, {"comparison", cmp}, {"all_hold", sc.all_hold}};

  const JohnNirenbergResult jn = run_john_nirenberg_battery(bo);
  json jni = json::array();
  for (const auto& it : jn.items) {
    json e = inequality_json(it.report);
    e["integrand"] = it.label;
    e["norm_sq"] = num(it.report.norm_sq);
    if (it.closed_form) e["closed_form"] = {{"lhs", num(it.exact_lhs)}, {"rhs", num(it.exact_rhs)}};
    jni.push_back(e);
  }
  j["john_nirenberg"] = {{"items", jni}, {"applicable", jn.applicable}, {"all_hold", jn.all_hold}};

  const ReverseHolderResult rh = run_reverse_holder_battery(bo);
  json rhi = json::array();
  for (const auto& it : rh.items) {
    json e = inequality_json(it.report);
    e["integrand"] = it.label;
    e["p"] = num(it.report.p);
    e["norm"] = num(it.report.norm);
    e["phi_p"] = num(it.report.phi_p);
    e["empirical_c_p"] = num(it.report.empirical_c_p);
    if (it.closed_form) {
      e["closed_form"] = {{"moment", num(it.exact_lhs)},
                          {"constant", num(it.exact_rhs)},
                          {"moment_error_se", num(it.moment_error_se)}};
    }
    rhi.push_back(e);
  }
  j["reverse_holder"] = {{"items", rhi}, {"applicable", rh.applicable}, {"all_hold", rh.all_hold}};

  const GirsanovBatteryResult gb = run_girsanov_battery(bo);
  json gi = json::array();
  for (const auto& it : gb.items) {
    json e = girsanov_json(it.report);
    e["M"] = it.label_M;
    e["N"] = it.label_N;
    gi.push_back(e);
  }
  j["girsanov"] = {{"K", gb.K},
                   {"items", gi},
                   {"zero_N", girsanov_json(gb.zero_n)},
                   {"applicable", gb.applicable},
                   {"all_hold", gb.all_hold}};
  o.ok = sc.all_hold && jn.all_hold && rh.all_hold && gb.all_hold;
  j["all_hold"] = o.ok;
  return o;
}

json config_json(const RunConfig& c) {
  return {{"command", c.command},
          {"instance", c.instance},
          {"mode", mode_name(c.mode)},
          {"steps", c.steps},
          {"paths", c.paths},
          {"seed", c.seed},
          {"basis", c.basis == BasisKind::kBins ? "bins" : "poly"},
          {"basis_order", c.basis_order},
          {"tol", c.tol},
          {"max_iter", c.max_iter},
          {"epsilon", c.epsilon ? json(*c.epsilon) : json(nullptr)},
          {"segment_length", c.segment_length ? json(*c.segment_length) : json(nullptr)},
          {"eta_floor", c.eta_floor},
          {"uniqueness", c.uniqueness},
          {"battery_count", c.battery_count},
          {"probes", c.probes}};
}

json manifest_json(const RunConfig& cfg, const Output& o, const std::vector<std::string>& files) {
  return {{"tool", "qbsde"},
          {"version", kVersion},
          {"instance_schema_version", kInstanceSchemaVersion},
          {"config", config_json(cfg)},
          {"seed", cfg.seed},
          {"grid", o.grid},
          {"rng", "counter-based splitmix64 + Box-Muller"},
          {"compiler", __VERSION__},
          {"cplusplus", static_cast<long>(__cplusplus)},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"files", files}};
}

void emit(const RunConfig& cfg, const Output& o) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::string> files{"summary.json", "manifest.json"};
  json summary = o.summary;
  summary["config"] = config_json(cfg);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  if (o.trace) {
    write_text(dir / "trace.csv", *o.trace);
    files.push_back("trace.csv");
  }
  if (o.solution) {
    write_text(dir / "solution.csv", *o.solution);
    files.push_back("solution.csv");
  }
  write_text(dir / "manifest.json", manifest_json(cfg, o, files).dump(2) + "\n");
}

template <class T>
T parse_num(const std::string& v, const std::string& key, std::size_t line) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (!is || !is.eof()) throw ParseError("bad value for '" + key + "'", line, 1);
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (steps == 0) throw InvalidArgument("steps must be positive");
  if (paths < 2) throw InvalidArgument("paths must be at least 2");
  if (basis_order == 0) throw InvalidArgument("basis_order must be positive");
  if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (max_iter == 0) throw InvalidArgument("max_iter must be positive");
  if (epsilon && !(*epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (segment_length && !(*segment_length > 0.0)) throw InvalidArgument("segment_length must be positive");
  if (!(eta_floor > 0.0)) throw InvalidArgument("eta_floor must be positive");
  if (battery_count == 0) throw InvalidArgument("battery_count must be positive");
  if (out_dir.empty()) throw InvalidArgument("out must name a directory");
}

RegressionBasis RunConfig::regression_basis() const {
  return basis == BasisKind::kBins ? RegressionBasis::bins(basis_order)
                                   : RegressionBasis::polynomial(basis_order);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path);
  RunConfig c;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string body = trim(raw.substr(0, raw.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line, 1);
    const std::string k = trim(body.substr(0, eq));
    const std::string v = trim(body.substr(eq + 1));
    if (k == "command") c.command = v;
    else if (k == "instance") c.instance = v;
    else if (k == "mode") {
      if (v == "certified") c.mode = SolveMode::kCertified;
      else if (v == "working") c.mode = SolveMode::kWorking;
      else throw ParseError("mode must be certified or working", line, eq + 2);
    } else if (k == "steps") c.steps = parse_num<std::size_t>(v, k, line);
    else if (k == "paths") c.paths = parse_num<std::size_t>(v, k, line);
    else if (k == "seed") c.seed = parse_num<std::uint64_t>(v, k, line);
    else if (k == "basis") {
      if (v == "poly") c.basis = BasisKind::kPolynomial;
      else if (v == "bins") c.basis = BasisKind::kBins;
      else throw ParseError("basis must be poly or bins", line, eq + 2);
    } else if (k == "basis_order") c.basis_order = parse_num<std::size_t>(v, k, line);
    else if (k == "tol") c.tol = parse_num<double>(v, k, line);
    else if (k == "max_iter") c.max_iter = parse_num<std::size_t>(v, k, line);
    else if (k == "epsilon") c.epsilon = parse_num<double>(v, k, line);
    else if (k == "segment_length") c.segment_length = parse_num<double>(v, k, line);
    else if (k == "eta_floor") c.eta_floor = parse_num<double>(v, k, line);
    else if (k == "uniqueness") c.uniqueness = v == "true" || v == "1";
    else if (k == "battery_count") c.battery_count = parse_num<std::size_t>(v, k, line);
    else if (k == "probes") c.probes = parse_num<std::size_t>(v, k, line);
    else if (k == "out") c.out_dir = v;
    else throw ParseError("unknown key '" + k + "'", line, 1);
  }
  return c;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    if (config.command == "list-instances") {
      json a = json::array();
      for (const auto& i : list_instances()) a.push_back({{"id", i.id}, {"description", i.description}});
      out << a.dump(2) << "\n";
      return 0;
    }
    Output o;
    if (config.command == "verify-lemmas") {
      o = do_verify_lemmas(config);
    } else {
      const ProblemInstance inst = resolve_instance(config.instance, config.probes);
      if (config.command == "constants") {
        o = do_constants(config, inst);
      } else if (config.command == "solve-local") {
        o = do_solve_local(config, inst);
      } else if (config.command == "solve-global") {
        o = do_solve_global(config, inst);
      } else {
        throw InvalidArgument("unknown command '" + config.command + "'");
      }
    }
    emit(config, o);
    out << o.summary.dump() << "\n";
    return o.ok ? 0 : 1;
  } catch (const Error& e) {
    json j{{"error", std::string(to_string(e.code()))}, {"code", static_cast<int>(e.code())},
           {"message", e.what()}};
    if (const auto* p = dynamic_cast<const ParseError*>(&e)) {
      j["line"] = p->line();
      j["column"] = p->column();
    } else if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
      j["probe"] = v->probe();
    } else if (const auto* b = dynamic_cast<const BoundViolation*>(&e)) {
      j["observed"] = num(b->observed());
      j["bound"] = num(b->bound());
    } else if (const auto* c = dynamic_cast<const ConvergenceError*>(&e)) {
      j["trace"] = trace_json(c->trace());
    } else if (const auto* o = dynamic_cast<const OverflowError*>(&e)) {
      j["exponent"] = num(o->exponent());
    } else if (const auto* iv = dynamic_cast<const InvariantError*>(&e)) {
      j["inequality"] = iv->inequality();
    }
    err << j.dump() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"code", 1}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
}

}  // namespace qbsde
