#include "qbsde/globalsolve.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qbsde/bmo.hpp"
#include "qbsde/error.hpp"

namespace qbsde {

namespace {

// Node indices of the breakpoints, decreasing, first = last node.
std::vector<std::size_t> breakpoint_nodes(const StitchPlan& plan, const TimeGrid& grid) {
  std::vector<std::size_t> nodes;
  const double dt = grid.dt();
  for (double tau : plan.breakpoints) {
    const double pos = (tau - grid.t0()) / dt;
    const auto node = static_cast<std::size_t>(std::llround(std::max(0.0, pos)));
    if (std::abs(pos - static_cast<double>(node)) > 1e-6) {
      throw InvalidArgument("breakpoint " + std::to_string(tau) + " is not on the grid");
    }
    if (!nodes.empty() && node >= nodes.back()) {
      throw InvalidArgument("segment shorter than one grid step; refine the grid");
    }
    nodes.push_back(node);
  }
  return nodes;
}

}  // namespace

std::vector<double> StitchPlan::segment_lengths() const {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    out.push_back(breakpoints[i] - breakpoints[i + 1]);
  }
  return out;
}

StitchPlan plan_stitch(double t0, double T, long double eta) {
  if (!(T > t0)) throw InvalidArgument("stitching needs T > t0");
  if (!(eta > 0)) throw InvalidArgument("segment length must be > 0");
  const long double span = static_cast<long double>(T) - t0;
  const long double count = std::ceil(span / eta - 1e-9L);
  if (count > 1e7L) {
    throw InvalidArgument("stitch plan needs " + std::to_string(static_cast<double>(count)) +
                          " segments; use working mode with a longer segment");
  }
  StitchPlan plan;
  plan.eta = eta;
  const auto m = static_cast<std::size_t>(std::max(1.0L, count));
  for (std::size_t k = 0; k < m; ++k) {
    plan.breakpoints.push_back(static_cast<double>(T - static_cast<long double>(k) * eta));
  }
  plan.breakpoints.push_back(t0);
  return plan;
}

StitchPlan plan_stitch(const StructuralConstants& structural, double floor) {
  if (structural.alpha != 0.0) throw InvalidArgument("stitching needs alpha = 0");
  const GlobalSolveParameters gp = global_parameters(structural);
  if (gp.eta_lambda < floor) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "certified eta_lambda = %.6Lg is below the floor %.3g; use working mode",
                  gp.eta_lambda, floor);
    throw InvalidArgument(buf);
  }
  return plan_stitch(0.0, structural.T, gp.eta_lambda);
}

GlobalSolution global_solve(const SystemGenerator& gen, const TerminalMap& xi,
                            const PathEnsemble& ensemble, const GlobalSolveOptions& options) {
  const StructuralConstants& s0 = gen.structural();
  if (s0.alpha != 0.0) throw InvalidArgument("global solutions need alpha = 0");
  if (xi.dim != gen.n()) throw InvalidArgument("terminal map dimension differs from n");
  const TimeGrid& grid = ensemble.grid();
  const std::size_t N = ensemble.num_nodes();
  const std::size_t P = ensemble.num_paths();
  const std::size_t n = gen.n();
  const std::size_t d = gen.d();

  const TerminalValues term = evaluate_terminal(ensemble, xi);
  const double xi_bound = std::max(s0.xi_bound, term.sup_norm);
  StructuralConstants s = s0;
  s.xi_bound = xi_bound;
  s.T = grid.horizon();

  GlobalSolution out;
  out.lambda = uniform_y_bound(s.C, xi_bound, grid.horizon());
  if (options.mode == SolveMode::kCertified) {
    out.plan = plan_stitch(s, options.eta_floor);
    for (double& b : out.plan.breakpoints) b += grid.t0();
  } else {
    const double steps = std::floor(options.segment_length / grid.dt() + 1e-9);
    if (!(steps >= 1.0)) throw InvalidArgument("segment length is below one grid step");
    out.plan = plan_stitch(grid.t0(), grid.T(), steps * grid.dt());
  }
  const auto nodes = breakpoint_nodes(out.plan, grid);

  out.Y = AdaptedField(N, P, n);
  out.Z = AdaptedField(N, P, n * d);
  LocalSolveOptions lo = options.local;
  lo.certified = options.mode == SolveMode::kCertified;
  lo.gamma.track_se = true;

  PathVectors terminal = term.values;
  for (std::size_t seg = 0; seg + 1 < nodes.size(); ++seg) {
    const std::size_t b = nodes[seg];
    const std::size_t a = nodes[seg + 1];
    const PathEnsemble sub = ensemble.slice(a, b);
    LocalSolveResult res = local_solve(gen, terminal, sub, lo);
    const BsdeSolution& sol = res.solution;

    if (seg > 0) {
      double jump = 0.0;
      for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t i = 0; i < n; ++i) {
          jump = std::max(jump, std::abs(sol.Y(b - a, p, i) - out.Y(b, p, i)));
        }
      }
      out.seam_jumps.push_back(jump);
    }
    // uniform bound, node by node, in its time-dependent form
    for (std::size_t k = 0; k + a <= b; ++k) {
      const double bound = uniform_y_bound(s.C, xi_bound, grid.T() - grid.time(a + k));
      double se = 0.0;
      for (double v : sol.y_se.node(k)) se = std::max(se, v);
      const double ysup = sol.Y.sup_row_norm(k);
      if (ysup > bound + 5.0 * se + options.bound_slack) {
        throw BoundViolation("sup|Y| = " + std::to_string(ysup) + " exceeds the uniform bound " +
                                 std::to_string(bound) + " at node " + std::to_string(a + k),
                             ysup, bound);
      }
    }
    for (std::size_t k = 0; k + a <= b; ++k) {
      for (std::size_t p = 0; p < P; ++p) {
        std::copy_n(sol.Y.row(k, p).begin(), n, out.Y.row(a + k, p).begin());
        if (k + a < b) std::copy_n(sol.Z.row(k, p).begin(), n * d, out.Z.row(a + k, p).begin());
      }
    }
    SegmentReport rep;
    rep.first_node = a;
    rep.last_node = b;
    rep.iterations = res.iterations;
    rep.trace = res.trace;
    rep.fixed_point_residual = res.fixed_point_residual;
    rep.seam_y_sup = sol.Y.sup_row_norm(0);
    rep.seam_lambda = uniform_y_bound(s.C, xi_bound, grid.T() - grid.time(a));
    out.segments.push_back(std::move(rep));

    terminal = PathVectors(P, n);
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t i = 0; i < n; ++i) terminal(p, i) = sol.Y(0, p, i);
    }
  }

  // Pathwise ξ + Σ g Δt over the whole horizon for the Y_0 standard error.
  const double dt = grid.dt();
  std::vector<double> acc(term.values.values);
  std::vector<double> hv(n);
  for (std::size_t k = 0; k + 1 < N; ++k) {
    const double t = grid.time(k);
    const auto w = ensemble.w_at(k);
    for (std::size_t p = 0; p < P; ++p) {
      const auto wp = w.subspan(p * d, d);
      const auto zrow = out.Z.row(k, p);
      gen.h(t, wp, out.Y.row(k, p), zrow, hv);
      for (std::size_t i = 0; i < n; ++i) {
        acc[p * n + i] += (gen.f(i)(t, wp, zrow.subspan(i * d, d)) + hv[i]) * dt;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double y0 = 0.0;
    double m = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      y0 += out.Y(0, p, i);
      m += acc[p * n + i];
    }
    y0 /= static_cast<double>(P);
    m /= static_cast<double>(P);
    double var = 0.0;
    for (std::size_t p = 0; p < P; ++p) var += (acc[p * n + i] - m) * (acc[p * n + i] - m);
    out.y0.push_back(y0);
    out.y0_mc_se.push_back(P > 1 ? std::sqrt(var / static_cast<double>(P - 1) / static_cast<double>(P)) : 0.0);
  }
  out.z_bmo_sq = bmo2_norm(ensemble, out.Z, lo.gamma.basis).norm_sq;
  out.y_sup = out.Y.sup_row_norm();
  return out;
}

ZBmoReport z_bmo_report(const GlobalSolution& solution, const StructuralConstants& structural) {
  ZBmoReport rep;
  rep.estimate = std::sqrt(solution.z_bmo_sq);
  rep.bound = z_bmo_bound(structural, solution.lambda);
  rep.slack = rep.bound - rep.estimate;
  rep.holds = rep.slack >= 0.0;
  return rep;
}

UniquenessReport uniqueness_probe(const SystemGenerator& gen, const TerminalMap& xi,
                                  const PathEnsemble& ensemble, const PathEnsemble& other,
                                  const GlobalSolveOptions& options,
                                  const SystemGenerator* gen_b) {
  const SystemGenerator& second = gen_b ? *gen_b : gen;
  GlobalSolveOptions oa = options;
  oa.local.initial = InitialGuess::kConditionalMean;
  oa.local.initial_state.reset();
  GlobalSolveOptions ob = oa;
  ob.local.initial = InitialGuess::kZero;

  const GlobalSolution a = global_solve(gen, xi, ensemble, oa);
  const GlobalSolution b = global_solve(second, xi, ensemble, ob);
  const GlobalSolution c = global_solve(second, xi, other, oa);

  UniquenessReport rep;
  rep.y_sup_distance = sup_distance(a.Y, b.Y);
  rep.z_bmo_distance = bmo2_norm(ensemble, a.Z - b.Z, oa.local.gamma.basis).norm();
  rep.same_tolerance =
      5.0 * 2.0 * options.local.tol * static_cast<double>(std::max<std::size_t>(a.segments.size(), 1));
  bool seeds_ok = true;
  for (std::size_t i = 0; i < a.y0.size(); ++i) {
    const double dist = std::abs(a.y0[i] - c.y0[i]);
    const double tol = 5.0 * std::hypot(a.y0_mc_se[i], c.y0_mc_se[i]);
    if (dist > rep.y0_seed_distance) {
      rep.y0_seed_distance = dist;
      rep.seed_tolerance = tol;
    }
    if (dist > tol) seeds_ok = false;
  }
  rep.passes = rep.y_sup_distance <= rep.same_tolerance &&
               rep.z_bmo_distance <= rep.same_tolerance && seeds_ok;
  return rep;
}

}  // namespace qbsde
