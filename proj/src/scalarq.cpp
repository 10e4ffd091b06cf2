#include "qbsde/scalarq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qbsde/constants.hpp"
#include "qbsde/error.hpp"

namespace qbsde {

namespace {

constexpr std::uint64_t kProbeSeed = 0x9e3779b97f4a7c15ULL;

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void check_shapes(const PathEnsemble& ens, const DriverField& driver, std::span<const double> xi) {
  if (driver.num_nodes() != ens.num_nodes() || driver.num_paths() != ens.num_paths() ||
      driver.dim() != 1) {
    throw InvalidArgument("driver must be nodes × paths × 1 on the ensemble");
  }
  if (xi.size() != ens.num_paths()) throw InvalidArgument("terminal values need one per path");
  for (double v : xi) {
    if (!std::isfinite(v)) throw DomainError("terminal values must be finite");
  }
  if (!driver.all_finite()) throw DomainError("driver has non-finite values");
}

// ∫_{t_k}^T g ds per path by the left-endpoint rule, for every node.
std::vector<double> tail_integrals(const DriverField& g, std::size_t node, double dt,
                                   std::size_t paths, bool absolute, double add) {
  std::vector<double> out(paths, 0.0);
  for (std::size_t k = node; k + 1 < g.num_nodes(); ++k) {
    for (std::size_t p = 0; p < paths; ++p) {
      const double v = g(k, p, 0);
      out[p] += ((absolute ? std::abs(v) : v) + add) * dt;
    }
  }
  return out;
}

double default_z_cap(double gamma, double C, double xi_sup, double g_sup, double horizon,
                     double y_bar) {
  try {
    const double B = 2.0 * (phi(xi_sup, gamma) + phi_prime(y_bar, gamma) * (C + g_sup) * horizon);
    return std::max(10.0, 10.0 * std::sqrt(B));
  } catch (const OverflowError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

ScalarGenerator::ScalarGenerator(Fn f, double C, double gamma, std::size_t d, double lipschitz,
                                 double horizon, std::size_t probes)
    : f_(std::move(f)), C_(C), gamma_(gamma), lipschitz_(lipschitz), d_(d) {
  if (!f_) throw InvalidArgument("generator function is empty");
  if (!(C >= 0.0) || !(gamma > 0.0)) throw InvalidArgument("generator needs C >= 0 and gamma > 0");
  if (d == 0) throw InvalidArgument("generator dimension must be >= 1");
  std::vector<double> w(d), z(d), z2(d);
  for (std::size_t i = 0; i < probes; ++i) {
    const double t = horizon * 0.5 * (1.0 + std::tanh(counter_normal(kProbeSeed, i, 0, 0)));
    const double mag = std::pow(10.0, -3.0 + 6.0 * static_cast<double>(i) / std::max<std::size_t>(probes - 1, 1));
    double zn = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      w[c] = 2.0 * counter_normal(kProbeSeed, i, 1, c);
      z[c] = counter_normal(kProbeSeed, i, 2, c);
      zn += z[c] * z[c];
    }
    zn = std::sqrt(zn);
    for (std::size_t c = 0; c < d; ++c) z[c] = zn > 0 ? z[c] / zn * mag : mag;
    const double v = f_(t, w, z);
    const double bound = C + 0.5 * gamma * norm2(z);
    auto probe = [&] {
      std::vector<double> pt{t};
      pt.insert(pt.end(), w.begin(), w.end());
      pt.insert(pt.end(), z.begin(), z.end());
      return pt;
    };
    if (!std::isfinite(v)) throw ValidationError("generator is not finite at a probe", probe());
    if (std::abs(v) > bound * (1.0 + 1e-12) + 1e-300) {
      throw ValidationError("|f| = " + std::to_string(std::abs(v)) + " exceeds C + γ/2|z|² = " +
                                std::to_string(bound),
                            probe());
    }
    if (lipschitz > 0.0) {
      for (std::size_t c = 0; c < d; ++c) {
        z2[c] = z[c] * (1.0 + 0.1 * counter_normal(kProbeSeed, i, 3, c));
      }
      double dz = 0.0;
      for (std::size_t c = 0; c < d; ++c) dz += (z[c] - z2[c]) * (z[c] - z2[c]);
      dz = std::sqrt(dz);
      const double lhs = std::abs(v - f_(t, w, z2));
      const double rhs = lipschitz * (1.0 + std::sqrt(norm2(z)) + std::sqrt(norm2(z2))) * dz;
      if (lhs > rhs * (1.0 + 1e-9) + 1e-12) {
        throw ValidationError("local Lipschitz bound fails at a probe", probe());
      }
    }
  }
}

ScalarGenerator ScalarGenerator::pure_quadratic(double gamma, std::size_t d) {
  return ScalarGenerator(
      [gamma](double, std::span<const double>, std::span<const double> z) {
        return 0.5 * gamma * norm2(z);
      },
      0.0, gamma, d, gamma, 1.0, 0);
}

ScalarGenerator ScalarGenerator::zero(std::size_t d) {
  return ScalarGenerator([](double, std::span<const double>, std::span<const double>) { return 0.0; },
                         0.0, 1.0, d, 0.0, 1.0, 0);
}

DriverField zero_driver(const PathEnsemble& ensemble) {
  return DriverField(ensemble.num_nodes(), ensemble.num_paths(), 1, 0.0);
}

DriverField constant_driver(const PathEnsemble& ensemble, double value) {
  return DriverField(ensemble.num_nodes(), ensemble.num_paths(), 1, value);
}

DriverDiagnostics diagnose_driver(const DriverField& driver, const PathEnsemble& ensemble,
                                  double gamma, double p) {
  DriverDiagnostics out;
  out.finite = driver.all_finite();
  if (!out.finite) {
    out.exp_moment = std::numeric_limits<double>::infinity();
    return out;
  }
  out.sup_abs = driver.sup_abs();
  const auto ints = tail_integrals(driver, 0, ensemble.grid().dt(), ensemble.num_paths(), true, 0.0);
  double acc = 0.0;
  for (double v : ints) {
    out.max_integral = std::max(out.max_integral, v);
    acc += std::exp(p * gamma * v);
  }
  out.exp_moment = acc / static_cast<double>(ints.size());
  return out;
}

ScalarSolution solve_scalar(const PathEnsemble& ensemble, const ScalarGenerator& gen,
                            const DriverField& driver, std::span<const double> xi,
                            const RegressionBasis& basis, const ScalarSolveOptions& options) {
  check_shapes(ensemble, driver, xi);
  const std::size_t d = ensemble.dim();
  if (gen.dim() != d) throw InvalidArgument("generator dimension differs from the ensemble");
  const std::size_t N = ensemble.num_nodes();
  const std::size_t P = ensemble.num_paths();
  const TimeGrid& grid = ensemble.grid();
  const double dt = grid.dt();

  double xi_sup = 0.0;
  for (double v : xi) xi_sup = std::max(xi_sup, std::abs(v));
  const double g_sup = driver.sup_abs();

  ScalarSolution sol;
  sol.Y = AdaptedField(N, P, 1);
  sol.Z = AdaptedField(N, P, d);
  if (options.track_se) sol.y_se = AdaptedField(N, P, 1);
  sol.a_priori_bound = xi_sup + (gen.C() + g_sup) * grid.horizon();
  sol.z_cap = options.z_cap ? *options.z_cap
                            : default_z_cap(gen.gamma(), gen.C(), xi_sup, g_sup, grid.horizon(),
                                            sol.a_priori_bound);
  if (!(sol.z_cap > 0.0)) throw InvalidArgument("z_cap must be > 0");
  const double limit = 10.0 * sol.a_priori_bound + 1e-9;

  sol.Y.set_component(N - 1, 0, xi);
  // Pathwise ξ + Σ (f + g) Δt; its mean is Y at the first node.
  std::vector<double> pathwise(xi.begin(), xi.end());

  std::vector<double> next(P), target(P), zc(d);
  for (std::size_t k = N - 1; k-- > 0;) {
    const NodeProjector proj(ensemble, k, basis, options.ridge);
    for (std::size_t p = 0; p < P; ++p) next[p] = sol.Y(k + 1, p, 0);
    const auto mean_next = proj.project(next).values;
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t p = 0; p < P; ++p) {
        target[p] = (next[p] - mean_next[p]) * ensemble.dw(k, p, c) / dt;
      }
      const auto zk = proj.project(target).values;
      for (std::size_t p = 0; p < P; ++p) sol.Z(k, p, c) = zk[p];
    }
    const double t = grid.time(k);
    const auto w = ensemble.w_at(k);
    for (std::size_t p = 0; p < P; ++p) {
      const auto zrow = sol.Z.row(k, p);
      const double zn = std::sqrt(norm2(zrow));
      double fv;
      if (zn > sol.z_cap) {
        ++sol.cap_hits;
        const double s = sol.z_cap / zn;
        for (std::size_t c = 0; c < d; ++c) zc[c] = zrow[c] * s;
        fv = gen(t, w.subspan(p * d, d), zc);
      } else {
        fv = gen(t, w.subspan(p * d, d), zrow);
      }
      const double incr = (fv + driver(k, p, 0)) * dt;
      target[p] = next[p] + incr;
      pathwise[p] += incr;
    }
    const auto yk = proj.project(target, options.track_se);
    // a conditional expectation stays inside the range of its target
    const auto [tlo, thi] = std::minmax_element(target.begin(), target.end());
    double ymax = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      if (!std::isfinite(yk.values[p])) {
        throw DivergenceError("non-finite Y at node " + std::to_string(k), yk.values[p], limit);
      }
      sol.Y(k, p, 0) = std::clamp(yk.values[p], *tlo, *thi);
      ymax = std::max(ymax, std::abs(yk.values[p]));
      if (options.track_se) sol.y_se(k, p, 0) = yk.se[p];
    }
    if (ymax > limit) {
      throw DivergenceError("max|Y| = " + std::to_string(ymax) + " at node " + std::to_string(k) +
                                " exceeds 10x the a priori bound",
                            ymax, limit);
    }
  }

  double mean = 0.0;
  for (std::size_t p = 0; p < P; ++p) mean += sol.Y(0, p, 0);
  sol.y0 = mean / static_cast<double>(P);
  double m = 0.0;
  for (double v : pathwise) m += v;
  m /= static_cast<double>(P);
  double var = 0.0;
  for (double v : pathwise) var += (v - m) * (v - m);
  sol.y0_mc_se = P > 1 ? std::sqrt(var / static_cast<double>(P - 1) / static_cast<double>(P)) : 0.0;
  return sol;
}

ColeHopfSolution cole_hopf_solve(const PathEnsemble& ensemble, double gamma,
                                 const DriverField& driver, std::span<const double> xi,
                                 const RegressionBasis& basis) {
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be > 0");
  check_shapes(ensemble, driver, xi);
  const std::size_t N = ensemble.num_nodes();
  const std::size_t P = ensemble.num_paths();
  const double dt = ensemble.grid().dt();
  ColeHopfSolution out{AdaptedField(N, P, 1), AdaptedField(N, P, 1)};

  std::vector<double> expo(P), target(P);
  for (std::size_t p = 0; p < P; ++p) expo[p] = gamma * xi[p];
  out.Y.set_component(N - 1, 0, xi);
  for (std::size_t k = N - 1; k-- > 0;) {
    for (std::size_t p = 0; p < P; ++p) expo[p] += gamma * driver(k, p, 0) * dt;
    const auto [lo_it, hi_it] = std::minmax_element(expo.begin(), expo.end());
    const double top = *hi_it;
    if (top - *lo_it > 700.0 || std::abs(top) > 1e300) throw OverflowError("cole-hopf exponential", top);
    double tmin = std::numeric_limits<double>::infinity();
    double tmax = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      target[p] = std::exp(expo[p] - top);
      tmin = std::min(tmin, target[p]);
      tmax = std::max(tmax, target[p]);
    }
    const auto proj = NodeProjector(ensemble, k, basis).project(target, true);
    for (std::size_t p = 0; p < P; ++p) {
      const double v = std::clamp(proj.values[p], tmin, tmax);
      out.Y(k, p, 0) = (top + std::log(v)) / gamma;
      out.y_se(k, p, 0) = proj.se[p] / (gamma * v);
    }
  }
  return out;
}

APrioriReport a_priori_check(const AdaptedField& Y, const DriverField& driver,
                             std::span<const double> xi, double gamma,
                             const PathEnsemble& ensemble, const RegressionBasis& basis,
                             double constant_c, const AdaptedField* y_se) {
  check_shapes(ensemble, driver, xi);
  if (Y.num_nodes() != ensemble.num_nodes() || Y.num_paths() != ensemble.num_paths()) {
    throw InvalidArgument("Y does not live on the ensemble");
  }
  if (y_se && (y_se->num_nodes() != Y.num_nodes() || y_se->num_paths() != Y.num_paths())) {
    throw InvalidArgument("y_se does not match Y");
  }
  const std::size_t N = ensemble.num_nodes();
  const std::size_t P = ensemble.num_paths();
  const double dt = ensemble.grid().dt();
  APrioriReport rep;
  rep.node_violation_se.assign(N, -std::numeric_limits<double>::infinity());
  rep.max_violation_se = -std::numeric_limits<double>::infinity();

  // R_k = E_k[R_{k+1} e^{γ(c+|g_k|)Δt}], R_N = e^{γ|ξ|}, kept relative to
  // the running scale e^{top}
  std::vector<double> rhs(P), target(P);
  double top = 0.0;
  for (std::size_t p = 0; p < P; ++p) top = std::max(top, gamma * std::abs(xi[p]));
  for (std::size_t p = 0; p < P; ++p) rhs[p] = std::exp(gamma * std::abs(xi[p]) - top);
  std::vector<double> se(P, 0.0);
  for (std::size_t k = N; k-- > 0;) {
    if (k + 1 < N) {
      double m = 0.0;
      for (std::size_t p = 0; p < P; ++p) {
        target[p] = std::log(std::max(rhs[p], 1e-300)) + gamma * (constant_c + std::abs(driver(k, p, 0))) * dt;
        m = std::max(m, target[p]);
      }
      for (std::size_t p = 0; p < P; ++p) target[p] = std::exp(target[p] - m);
      top += m;
      auto proj = NodeProjector(ensemble, k, basis).project(target, true);
      // a conditional expectation of a positive variable stays positive
      const double floor = *std::min_element(target.begin(), target.end());
      for (std::size_t p = 0; p < P; ++p) rhs[p] = std::max(proj.values[p], floor);
      se = std::move(proj.se);
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < P; ++p) {
      const double lhs = std::exp(gamma * std::abs(Y(k, p, 0)) - top);
      const double lse = y_se ? gamma * lhs * (*y_se)(k, p, 0) : 0.0;
      const double s = std::max(std::hypot(se[p], lse), 1e-12 * std::abs(rhs[p]) + 1e-300);
      worst = std::max(worst, (lhs - rhs[p]) / s);
    }
    rep.node_violation_se[k] = worst;
    if (worst > rep.max_violation_se) {
      rep.max_violation_se = worst;
      rep.worst_node = k;
    }
  }
  rep.holds = rep.max_violation_se <= 3.0;
  return rep;
}

ComparisonReport comparison_check(const ScalarSolution& lower, const ScalarSolution& upper,
                                  double floor_tol) {
  const auto& a = lower.Y;
  const auto& b = upper.Y;
  if (a.num_nodes() != b.num_nodes() || a.num_paths() != b.num_paths()) {
    throw InvalidArgument("solutions live on different ensembles");
  }
  ComparisonReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  rep.min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < a.num_nodes(); ++k) {
    for (std::size_t p = 0; p < a.num_paths(); ++p) {
      const double sa = lower.y_se.empty() ? 0.0 : lower.y_se(k, p, 0);
      const double sb = upper.y_se.empty() ? 0.0 : upper.y_se(k, p, 0);
      const double tol = std::max(floor_tol, 5.0 * std::sqrt(sa * sa + sb * sb));
      const double gap = b(k, p, 0) - a(k, p, 0);
      rep.min_gap = std::min(rep.min_gap, gap);
      if (gap + tol < rep.min_slack) {
        rep.min_slack = gap + tol;
        rep.worst_node = k;
        rep.worst_path = p;
      }
    }
  }
  rep.holds = rep.min_slack >= 0.0;
  return rep;
}

}  // namespace qbsde
