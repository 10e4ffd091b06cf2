#include "qbsde/picard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qbsde/bmo.hpp"

namespace qbsde {

namespace {

constexpr std::uint64_t kProbeSeed = 0xc2b2ae3d27d4eb4fULL;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double euclid(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dist_between(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void check_xi(const PathVectors& xi, const PathEnsemble& ens, std::size_t n) {
  if (xi.num_paths != ens.num_paths() || xi.dim != n) {
    throw InvalidArgument("terminal values must be paths × n on the ensemble");
  }
}

std::optional<LocalSolveParameters> try_certified(const StructuralConstants& s) {
  try {
    return local_parameters(s);
  } catch (const Error&) {
    return std::nullopt;
  }
}

double realized_sup(const PathVectors& xi) {
  double m = 0.0;
  for (double v : xi.values) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

SystemGenerator::SystemGenerator(std::vector<ScalarGenerator> f, HFn h,
                                 StructuralConstants structural, bool lipschitz_h,
                                 std::size_t probes)
    : f_(std::move(f)), h_(std::move(h)), structural_(structural), lipschitz_h_(lipschitz_h) {
  structural_.validate();
  if (f_.size() != structural_.n) throw InvalidArgument("need one f component per equation");
  for (std::size_t i = 0; i < f_.size(); ++i) {
    if (f_[i].dim() != structural_.d) {
      throw InvalidArgument("f component " + std::to_string(i) + " has the wrong dimension");
    }
    if (f_[i].C() > structural_.C || f_[i].gamma() > structural_.gamma) {
      throw InvalidArgument("f component " + std::to_string(i) +
                            " has growth constants above the structural (C, gamma)");
    }
  }
  if (!h_ || probes == 0) return;

  const std::size_t n = structural_.n;
  const std::size_t d = structural_.d;
  const double C = structural_.C;
  const double a = structural_.alpha;
  std::vector<double> w(d), y(n), z(n * d), y2(n), z2(n * d), out(n), out2(n);
  for (std::size_t i = 0; i < probes; ++i) {
    const double t = structural_.T * 0.5 * (1.0 + std::tanh(counter_normal(kProbeSeed, i, 0, 0)));
    const double frac = static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(probes - 1, 1));
    const double ymag = std::pow(10.0, -2.0 + 4.0 * frac);
    const double zmag = std::pow(10.0, 2.0 - 4.0 * frac);
    for (std::size_t c = 0; c < d; ++c) w[c] = 2.0 * counter_normal(kProbeSeed, i, 1, c);
    for (std::size_t c = 0; c < n; ++c) y[c] = ymag * counter_normal(kProbeSeed, i, 2, c);
    for (std::size_t c = 0; c < n * d; ++c) z[c] = zmag * counter_normal(kProbeSeed, i, 3, c);
    h_(t, w, y, z, out);
    auto probe = [&] {
      std::vector<double> pt{t};
      pt.insert(pt.end(), w.begin(), w.end());
      pt.insert(pt.end(), y.begin(), y.end());
      pt.insert(pt.end(), z.begin(), z.end());
      return pt;
    };
    for (double v : out) {
      if (!std::isfinite(v)) throw ValidationError("h is not finite at a probe", probe());
    }
    const double zn = euclid(z);
    const double bound = C * (1.0 + euclid(y) + (lipschitz_h_ ? zn : std::pow(zn, 1.0 + a)));
    if (euclid(out) > bound * (1.0 + 1e-9)) {
      throw ValidationError("|h| = " + std::to_string(euclid(out)) + " exceeds its growth bound " +
                                std::to_string(bound),
                            probe());
    }
    for (std::size_t c = 0; c < n; ++c) y2[c] = y[c] * (1.0 + 0.1 * counter_normal(kProbeSeed, i, 4, c));
    for (std::size_t c = 0; c < n * d; ++c) {
      z2[c] = z[c] * (1.0 + 0.1 * counter_normal(kProbeSeed, i, 5, c));
    }
    h_(t, w, y2, z2, out2);
    const double dz = dist_between(z, z2);
    const double lip = lipschitz_h_
                           ? C * (dist_between(y, y2) + dz)
                           : C * dist_between(y, y2) +
                                 C * (1.0 + std::pow(zn, a) + std::pow(euclid(z2), a)) * dz;
    if (dist_between(out, out2) > lip * (1.0 + 1e-9) + 1e-12) {
      throw ValidationError("h violates its Lipschitz bound at a probe", probe());
    }
  }
}

void SystemGenerator::h(double t, std::span<const double> w, std::span<const double> y,
                        std::span<const double> z, std::span<double> out) const {
  if (!h_) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  h_(t, w, y, z, out);
}

SystemGenerator SystemGenerator::with_xi_bound(double xi_bound) const {
  SystemGenerator copy = *this;
  copy.structural_.xi_bound = xi_bound;
  return copy;
}

BallMetrics measure_state(const BallState& state, const PathEnsemble& ensemble,
                          const RegressionBasis& basis) {
  BallMetrics m;
  m.u_sup = state.U.sup_row_norm();
  m.v_bmo_sq = bmo2_norm(ensemble, state.V, basis).norm_sq;
  return m;
}

BallMembership ball_membership(const BallMetrics& metrics, const LocalSolveParameters& params,
                               const StructuralConstants& s) {
  BallMembership out;
  out.v_margin = static_cast<double>(params.A) - metrics.v_bmo_sq;
  const double lhs = 2.0 * static_cast<double>(s.n) * s.gamma * metrics.u_sup / (1.0 - s.alpha);
  out.log_u_margin = static_cast<double>(params.log_ball_u_bound()) - lhs;
  out.v_inside = out.v_margin >= 0.0;
  out.u_inside = out.log_u_margin >= 0.0;
  out.member = out.v_inside && out.u_inside;
  return out;
}

double step2_y_bound(const LocalSolveParameters& params, const StructuralConstants& s) {
  return (1.0 - s.alpha) / (2.0 * s.gamma) * static_cast<double>(params.log_ball_u_bound());
}

GammaResult gamma_map(const BallState& state, const SystemGenerator& gen, const PathVectors& xi,
                      const PathEnsemble& ensemble, const GammaOptions& options) {
  const std::size_t n = gen.n();
  const std::size_t d = gen.d();
  if (ensemble.dim() != d) throw InvalidArgument("ensemble dimension differs from the generator");
  check_xi(xi, ensemble, n);
  const std::size_t N = ensemble.num_nodes();
  const std::size_t P = ensemble.num_paths();
  if (state.U.num_nodes() != N || state.U.num_paths() != P || state.U.dim() != n ||
      state.V.num_nodes() != N || state.V.num_paths() != P || state.V.dim() != n * d) {
    throw InvalidArgument("ball state has the wrong shape");
  }
  if (!state.U.all_finite() || !state.V.all_finite()) throw DomainError("ball state is not finite");

  // frozen drivers h^i(t, U, V), all components at once
  AdaptedField drivers(N, P, n);
  for (std::size_t k = 0; k + 1 < N; ++k) {
    const double t = ensemble.grid().time(k);
    const auto w = ensemble.w_at(k);
    for (std::size_t p = 0; p < P; ++p) {
      gen.h(t, w.subspan(p * d, d), state.U.row(k, p), state.V.row(k, p), drivers.row(k, p));
    }
  }

  GammaResult out;
  out.Y = AdaptedField(N, P, n);
  out.Z = AdaptedField(N, P, n * d);
  if (options.track_se) out.y_se = AdaptedField(N, P, n);
  ScalarSolveOptions so;
  so.z_cap = options.z_cap;
  so.track_se = options.track_se;
  for (std::size_t i = 0; i < n; ++i) {
    const DriverField g = drivers.columns(i, 1);
    const auto xi_i = xi.component(i);
    ScalarSolution s;
    try {
      s = solve_scalar(ensemble, gen.f(i), g, xi_i, options.basis, so);
    } catch (const DivergenceError& e) {
      throw DivergenceError("component " + std::to_string(i) + ": " + e.what(), e.observed(),
                            e.limit());
    }
    for (std::size_t k = 0; k < N; ++k) {
      for (std::size_t p = 0; p < P; ++p) {
        out.Y(k, p, i) = s.Y(k, p, 0);
        for (std::size_t c = 0; c < d; ++c) out.Z(k, p, i * d + c) = s.Z(k, p, c);
        if (options.track_se) out.y_se(k, p, i) = s.y_se(k, p, 0);
      }
    }
    out.y0.push_back(s.y0);
    out.y0_mc_se.push_back(s.y0_mc_se);
    out.cap_hits += s.cap_hits;
  }
  return out;
}

BallState initial_state(InitialGuess guess, const PathVectors& xi, const PathEnsemble& ensemble,
                        std::size_t d, const RegressionBasis& basis) {
  const std::size_t n = xi.dim;
  check_xi(xi, ensemble, n);
  const std::size_t N = ensemble.num_nodes();
  const std::size_t P = ensemble.num_paths();
  BallState s{AdaptedField(N, P, n), AdaptedField(N, P, n * d)};
  if (guess == InitialGuess::kZero) return s;
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi_i = xi.component(i);
    s.U.set_component(N - 1, i, xi_i);
    for (std::size_t k = 0; k + 1 < N; ++k) {
      s.U.set_component(k, i, NodeProjector(ensemble, k, basis).project(xi_i).values);
    }
  }
  return s;
}

LocalSolveResult local_solve(const SystemGenerator& gen_in, const PathVectors& xi,
                             const PathEnsemble& ensemble, const LocalSolveOptions& options) {
  if (!(options.tol > 0.0)) throw InvalidArgument("tolerance must be > 0");
  if (options.max_iter == 0) throw InvalidArgument("max_iter must be >= 1");
  const double xi_sup = realized_sup(xi);
  const SystemGenerator gen =
      gen_in.with_xi_bound(std::max(gen_in.structural().xi_bound, xi_sup));
  const StructuralConstants& s = gen.structural();

  LocalSolveResult res;
  res.window = ensemble.grid().horizon();
  const auto params = try_certified(s);
  if (params) res.certified_params = *params;
  if (options.certified) {
    if (!params) throw InvalidArgument("certified mode needs a computable certified ledger");
    if (res.window > static_cast<double>(params->epsilon) * (1.0 + 1e-12)) {
      throw InvalidArgument("certified mode: window " + std::to_string(res.window) +
                            " exceeds the certified epsilon; use working mode");
    }
  }

  BallState state = options.initial_state
                        ? *options.initial_state
                        : initial_state(options.initial, xi, ensemble, gen.d(), options.gamma.basis);
  const RegressionBasis& basis = options.gamma.basis;
  GammaResult last;
  double prev = kNaN;
  bool converged = false;
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    last = gamma_map(state, gen, xi, ensemble, options.gamma);
    IterationRecord rec;
    rec.iteration = it;
    rec.y_dist_sup = sup_distance(last.Y, state.U);
    rec.z_dist_bmo = bmo2_norm(ensemble, last.Z - state.V, basis).norm();
    const double dist = std::max(rec.y_dist_sup, rec.z_dist_bmo);
    rec.ratio = std::isnan(prev) ? kNaN : (prev > 0.0 ? dist / prev : (dist > 0.0 ? kNaN : 0.0));
    if (params) {
      BallMetrics m{bmo2_norm(ensemble, last.Z, basis).norm_sq, last.Y.sup_row_norm()};
      rec.membership = ball_membership(m, *params, s);
      rec.in_ball = rec.membership.member;
    }
    if (!std::isnan(rec.ratio) && rec.ratio >= 1.0 && dist > options.tol) {
      res.trace.non_contraction = true;
    }
    res.trace.records.push_back(rec);
    state = BallState{last.Y, last.Z};
    prev = dist;
    res.iterations = it;
    if (dist <= options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError("Picard iteration did not reach tol " + std::to_string(options.tol) +
                               " in " + std::to_string(options.max_iter) + " iterations",
                           res.trace);
  }

  res.fixed_point_residual = kNaN;
  if (options.residual_check) {
    const GammaResult again = gamma_map(state, gen, xi, ensemble, options.gamma);
    res.fixed_point_residual = std::max(sup_distance(again.Y, last.Y),
                                        bmo2_norm(ensemble, again.Z - last.Z, basis).norm());
  }
  BsdeSolution& sol = res.solution;
  sol.Y = std::move(last.Y);
  sol.Z = std::move(last.Z);
  sol.y_se = std::move(last.y_se);
  sol.y0 = last.y0;
  sol.y0_mc_se = last.y0_mc_se;
  sol.cap_hits = last.cap_hits;
  sol.z_bmo_sq = bmo2_norm(ensemble, sol.Z, basis).norm_sq;
  sol.y_sup = sol.Y.sup_row_norm();
  return res;
}

ContractionReport contraction_probe(const BallState& a, const BallState& b,
                                    const SystemGenerator& gen, const PathVectors& xi,
                                    const PathEnsemble& ensemble, const GammaOptions& options) {
  const RegressionBasis& basis = options.basis;
  ContractionReport rep;
  const double du = a.U.num_nodes() == b.U.num_nodes() ? sup_distance(a.U, b.U) : kNaN;
  rep.input_dist_sq = du * du + bmo2_norm(ensemble, a.V - b.V, basis).norm_sq;
  const GammaResult ga = gamma_map(a, gen, xi, ensemble, options);
  const GammaResult gb = gamma_map(b, gen, xi, ensemble, options);
  const double dy = sup_distance(ga.Y, gb.Y);
  rep.output_dist_sq = dy * dy + bmo2_norm(ensemble, ga.Z - gb.Z, basis).norm_sq;
  rep.identity_input = rep.input_dist_sq == 0.0;
  rep.ratio = rep.identity_input ? kNaN : rep.output_dist_sq / rep.input_dist_sq;

  const std::size_t n = gen.n();
  const std::size_t d = gen.d();
  const std::size_t N = ensemble.num_nodes();
  const std::size_t P = ensemble.num_paths();
  std::vector<double> za(d), zb(d);
  for (std::size_t i = 0; i < n; ++i) {
    IntegrandField beta(N, P, d);
    for (std::size_t k = 0; k + 1 < N; ++k) {
      const double t = ensemble.grid().time(k);
      const auto w = ensemble.w_at(k);
      for (std::size_t p = 0; p < P; ++p) {
        double dz2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          za[c] = ga.Z(k, p, i * d + c);
          zb[c] = gb.Z(k, p, i * d + c);
          dz2 += (za[c] - zb[c]) * (za[c] - zb[c]);
        }
        if (dz2 == 0.0) continue;
        const auto wp = w.subspan(p * d, d);
        const double df = gen.f(i)(t, wp, za) - gen.f(i)(t, wp, zb);
        for (std::size_t c = 0; c < d; ++c) beta(k, p, c) = df * (za[c] - zb[c]) / dz2;
      }
    }
    rep.beta_bmo_sq.push_back(bmo2_norm(ensemble, beta, basis).norm_sq);
  }
  const StructuralConstants s = gen.with_xi_bound(std::max(gen.structural().xi_bound, realized_sup(xi)))
                                    .structural();
  const auto params = try_certified(s);
  const double C = s.C;
  const double T = ensemble.grid().horizon();
  rep.beta_bound_sq = params ? 3.0 * C * C * T + 6.0 * C * C * static_cast<double>(params->A) : kNaN;
  return rep;
}

}  // namespace qbsde
