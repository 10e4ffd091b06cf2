#include "qbsde/bmo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "qbsde/constants.hpp"
#include "qbsde/error.hpp"

namespace qbsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_integrand(const PathEnsemble& ens, const IntegrandField& b) {
  if (b.num_nodes() != ens.num_nodes() || b.num_paths() != ens.num_paths() || b.dim() == 0) {
    throw InvalidArgument("integrand must be nodes × paths × k on the ensemble");
  }
  if (!b.all_finite()) throw DomainError("integrand has non-finite values");
}

double row_sq(const IntegrandField& b, std::size_t k, std::size_t p) {
  double s = 0.0;
  for (double v : b.row(k, p)) s += v * v;
  return s;
}

struct NodeMax {
  double value = 0.0;
  double se = 0.0;
};

// Max over paths of the regression estimate, clamped to the target range.
NodeMax smoothed_max(const PathEnsemble& ens, std::size_t node, const std::vector<double>& targets,
                     const RegressionBasis& basis, std::span<const double> weights) {
  const auto [lo_it, hi_it] = std::minmax_element(targets.begin(), targets.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (lo == hi) return {hi, 0.0};
  const auto proj = NodeProjector(ens, node, basis, kDefaultRidge, weights).project(targets, true);
  NodeMax out{-kInf, 0.0};
  for (std::size_t p = 0; p < targets.size(); ++p) {
    const double v = std::clamp(proj.values[p], lo, hi);
    if (v > out.value) out = {v, proj.se[p]};
  }
  return out;
}

// Tail quadratic variation ∫_{t_k}^T |β|² ds for k running from the horizon
// backwards; calls visit(k, tails) at every node including the last.
void for_each_tail_qv(const PathEnsemble& ens, const IntegrandField& b,
                      const std::function<void(std::size_t, const std::vector<double>&)>& visit) {
  const std::size_t N = ens.num_nodes();
  const std::size_t P = ens.num_paths();
  const double dt = ens.grid().dt();
  std::vector<double> tail(P, 0.0);
  visit(N - 1, tail);
  for (std::size_t k = N - 1; k-- > 0;) {
    for (std::size_t p = 0; p < P; ++p) tail[p] += row_sq(b, k, p) * dt;
    visit(k, tail);
  }
}

// log ℰ over [t_k, T] per path, for k from the horizon backwards.
void for_each_tail_log_exp(const PathEnsemble& ens, const IntegrandField& b,
                           const std::function<void(std::size_t, const std::vector<double>&)>& visit) {
  if (b.dim() != ens.dim()) throw InvalidArgument("stochastic exponential needs a d-dimensional integrand");
  const std::size_t N = ens.num_nodes();
  const std::size_t P = ens.num_paths();
  const std::size_t d = ens.dim();
  const double dt = ens.grid().dt();
  std::vector<double> tail(P, 0.0);
  visit(N - 1, tail);
  for (std::size_t k = N - 1; k-- > 0;) {
    for (std::size_t p = 0; p < P; ++p) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += b(k, p, c) * ens.dw(k, p, c);
      tail[p] += s - 0.5 * row_sq(b, k, p) * dt;
    }
    visit(k, tail);
  }
}

// sup over nodes of the smoothed E_t[X^power]^{1/power} for X ≥ 0 given per node.
double sup_power_mean(const PathEnsemble& ens, const IntegrandField& b, double power,
                      const RegressionBasis& basis, std::span<const double> weights) {
  double best = 0.0;
  std::vector<double> target(ens.num_paths());
  for_each_tail_qv(ens, b, [&](std::size_t k, const std::vector<double>& tail) {
    const double top = *std::max_element(tail.begin(), tail.end());
    if (!(top > 0.0)) return;
    for (std::size_t p = 0; p < tail.size(); ++p) target[p] = std::pow(tail[p] / top, power);
    const NodeMax m = smoothed_max(ens, k, target, basis, weights);
    best = std::max(best, top * std::pow(std::max(m.value, 0.0), 1.0 / power));
  });
  return best;
}

// Max over nodes of the smoothed E_t[(ℰ(N)_t^T)^power].
double sup_exponential_moment(const PathEnsemble& ens, const IntegrandField& b, double power,
                              const RegressionBasis& basis) {
  double best = 0.0;
  std::vector<double> target(ens.num_paths());
  for_each_tail_log_exp(ens, b, [&](std::size_t k, const std::vector<double>& tail) {
    double top = -kInf;
    for (double v : tail) top = std::max(top, power * v);
    if (top > 700.0) throw OverflowError("stochastic exponential moment", top);
    for (std::size_t p = 0; p < tail.size(); ++p) target[p] = std::exp(power * tail[p] - top);
    const NodeMax m = smoothed_max(ens, k, target, basis, {});
    best = std::max(best, m.value * std::exp(top));
  });
  return best;
}

void finish(InequalityReport& rep) {
  rep.worst_slack = kInf;
  rep.worst_violation_se = -kInf;
  rep.holds = true;
  for (std::size_t k = 0; k < rep.node_estimate.size(); ++k) {
    const double excess = rep.node_estimate[k] - rep.bound;
    rep.worst_slack = std::min(rep.worst_slack, -excess);
    if (excess > 0.0) {
      const double units = rep.node_se[k] > 0.0 ? excess / rep.node_se[k] : kInf;
      rep.worst_violation_se = std::max(rep.worst_violation_se, units);
      if (units > 3.0) rep.holds = false;
    } else if (rep.node_se[k] > 0.0) {
      rep.worst_violation_se = std::max(rep.worst_violation_se, excess / rep.node_se[k]);
    }
  }
}

}  // namespace

IntegrandField constant_integrand(const PathEnsemble& ensemble, double c) {
  IntegrandField out(ensemble.num_nodes(), ensemble.num_paths(), ensemble.dim());
  for (std::size_t k = 0; k < out.num_nodes(); ++k) {
    for (std::size_t p = 0; p < out.num_paths(); ++p) out(k, p, 0) = c;
  }
  return out;
}

double BmoEstimate::norm() const { return std::sqrt(norm_sq); }

BmoEstimate bmo2_norm(const PathEnsemble& ensemble, const IntegrandField& integrand,
                      const RegressionBasis& basis, std::span<const double> weights) {
  check_integrand(ensemble, integrand);
  BmoEstimate est;
  const std::size_t N = ensemble.num_nodes();
  est.per_node_ess_sup.assign(N, 0.0);
  est.per_node_se.assign(N, 0.0);
  for_each_tail_qv(ensemble, integrand, [&](std::size_t k, const std::vector<double>& tail) {
    const NodeMax m = smoothed_max(ensemble, k, tail, basis, weights);
    if (!std::isfinite(m.value)) throw DomainError("non-finite quadratic variation");
    est.per_node_ess_sup[k] = std::max(0.0, m.value);
    est.per_node_se[k] = m.se;
  });
  for (std::size_t k = 0; k < N; ++k) {
    if (est.per_node_ess_sup[k] > est.norm_sq) {
      est.norm_sq = est.per_node_ess_sup[k];
      est.argmax_node = k;
    }
  }
  return est;
}

std::vector<double> log_stochastic_exponential(const PathEnsemble& ensemble,
                                               const IntegrandField& integrand,
                                               std::size_t from_node, std::size_t to_node) {
  check_integrand(ensemble, integrand);
  if (integrand.dim() != ensemble.dim()) {
    throw InvalidArgument("stochastic exponential needs a d-dimensional integrand");
  }
  if (from_node > to_node || to_node >= ensemble.num_nodes()) {
    throw InvalidArgument("stochastic exponential node range is invalid");
  }
  const std::size_t P = ensemble.num_paths();
  const std::size_t d = ensemble.dim();
  const double dt = ensemble.grid().dt();
  std::vector<double> out(P, 0.0);
  for (std::size_t k = from_node; k < to_node; ++k) {
    for (std::size_t p = 0; p < P; ++p) {
      double s = 0.0;
      double q = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double b = integrand(k, p, c);
        s += b * ensemble.dw(k, p, c);
        q += b * b;
      }
      out[p] += s - 0.5 * q * dt;
    }
  }
  return out;
}

std::vector<double> stochastic_exponential(const PathEnsemble& ensemble,
                                           const IntegrandField& integrand, std::size_t from_node,
                                           std::size_t to_node) {
  auto v = log_stochastic_exponential(ensemble, integrand, from_node, to_node);
  for (double& x : v) {
    if (x > 709.0) throw OverflowError("stochastic exponential", x);
    x = std::exp(x);
  }
  return v;
}

JohnNirenbergReport john_nirenberg_check(const PathEnsemble& ensemble,
                                         const IntegrandField& integrand,
                                         const RegressionBasis& basis) {
  JohnNirenbergReport rep;
  rep.norm_sq = bmo2_norm(ensemble, integrand, basis).norm_sq;
  if (!(rep.norm_sq < 1.0)) {
    rep.applicable = false;
    rep.reason = "BMO2 norm squared " + std::to_string(rep.norm_sq) + " is not below 1";
    return rep;
  }
  rep.bound = 1.0 / (1.0 - rep.norm_sq);
  const std::size_t N = ensemble.num_nodes();
  rep.node_estimate.assign(N, 0.0);
  rep.node_se.assign(N, 0.0);
  std::vector<double> target(ensemble.num_paths());
  for_each_tail_qv(ensemble, integrand, [&](std::size_t k, const std::vector<double>& tail) {
    for (std::size_t p = 0; p < tail.size(); ++p) {
      if (tail[p] > 700.0) throw OverflowError("exp of quadratic variation", tail[p]);
      target[p] = std::exp(tail[p]);
    }
    const NodeMax m = smoothed_max(ensemble, k, target, basis, {});
    rep.node_estimate[k] = m.value;
    rep.node_se[k] = m.se;
  });
  finish(rep);
  return rep;
}

ReverseHolderReport reverse_holder_check(const PathEnsemble& ensemble,
                                         const IntegrandField& integrand, double p,
                                         const RegressionBasis& basis) {
  if (!(p > 1.0)) throw InvalidArgument("reverse Hölder exponent must be > 1");
  ReverseHolderReport rep;
  rep.p = p;
  rep.norm = bmo2_norm(ensemble, integrand, basis).norm();
  rep.phi_p = capital_phi(p);
  const std::size_t N = ensemble.num_nodes();
  rep.node_estimate.assign(N, 0.0);
  rep.node_se.assign(N, 0.0);
  std::vector<double> target(ensemble.num_paths());
  for_each_tail_log_exp(ensemble, integrand, [&](std::size_t k, const std::vector<double>& tail) {
    double top = -kInf;
    for (double v : tail) top = std::max(top, p * v);
    if (top > 700.0) throw OverflowError("stochastic exponential power", top);
    for (std::size_t i = 0; i < tail.size(); ++i) target[i] = std::exp(p * tail[i] - top);
    const NodeMax m = smoothed_max(ensemble, k, target, basis, {});
    const double scale = std::exp(top);
    rep.node_estimate[k] = m.value * scale;
    rep.node_se[k] = m.se * scale;
  });
  rep.empirical_c_p = *std::max_element(rep.node_estimate.begin(), rep.node_estimate.end());
  if (!(rep.norm < rep.phi_p)) {
    rep.applicable = false;
    rep.reason = "BMO2 norm " + std::to_string(rep.norm) + " is not below Φ(p) = " +
                 std::to_string(rep.phi_p);
    rep.bound = kInf;
    return rep;
  }
  rep.bound = reverse_holder_constant(p, rep.norm);
  finish(rep);
  return rep;
}

double norm_equivalence_ratio(const PathEnsemble& ensemble, const IntegrandField& integrand,
                              double p, const RegressionBasis& basis,
                              std::span<const double> weights) {
  if (!(p >= 1.0)) throw InvalidArgument("norm equivalence needs p >= 1");
  const double n2 = bmo2_norm(ensemble, integrand, basis, weights).norm_sq;
  if (!(n2 > 0.0)) return 1.0;
  return sup_power_mean(ensemble, integrand, p / 2.0, basis, weights) / n2;
}

GirsanovReport girsanov_bmo_equivalence(const PathEnsemble& ensemble, const IntegrandField& M,
                                        const IntegrandField& N, double K,
                                        const RegressionBasis& basis) {
  if (!(K > 0.0)) throw InvalidArgument("Girsanov bound K must be > 0");
  GirsanovReport rep;
  const BmoEstimate bn = bmo2_norm(ensemble, N, basis);
  rep.norm_N = bn.norm();
  if (rep.norm_N > K) {
    rep.applicable = false;
    rep.reason = "‖N‖ = " + std::to_string(rep.norm_N) + " exceeds K = " + std::to_string(K);
    return rep;
  }
  const BmoEstimate bm = bmo2_norm(ensemble, M, basis);
  if (!(bm.norm_sq > 0.0)) {
    rep.applicable = false;
    rep.reason = "M has zero BMO2 norm";
    return rep;
  }
  const auto weights = stochastic_exponential(ensemble, N, 0, ensemble.num_nodes() - 1);
  const BmoEstimate bt = bmo2_norm(ensemble, M, basis, weights);
  rep.norm_M = bm.norm();
  rep.norm_M_tilde = bt.norm();
  rep.ratio = rep.norm_M_tilde / rep.norm_M;
  const double rel_t = bt.norm_sq > 0.0 ? bt.se() / bt.norm_sq : 0.0;
  const double rel_m = bm.se() / bm.norm_sq;
  rep.ratio_se = rep.ratio * 0.5 * std::sqrt(rel_t * rel_t + rel_m * rel_m);

  GirsanovBounds& g = rep.bounds;
  g.K = K;
  g.p = find_p_for_threshold(K);
  g.q = g.p / (g.p - 1.0);
  g.c_p = sup_exponential_moment(ensemble, N, g.p, basis);
  g.K_bar = std::sqrt(2.0 * (g.q - 1.0) * std::log(g.c_p + 1.0));
  g.p_bar = find_p_for_threshold(g.K_bar);
  g.q_bar = g.p_bar / (g.p_bar - 1.0);
  g.c_p_bar = sup_exponential_moment(ensemble, N, 1.0 - g.p_bar, basis);
  // battery {constant integrand, M}; the constant contributes ratio 1
  g.L2_2q = std::max(1.0, norm_equivalence_ratio(ensemble, M, 2.0 * g.q, basis));
  g.L2_2q_bar = std::max(1.0, norm_equivalence_ratio(ensemble, M, 2.0 * g.q_bar, basis, weights));
  g.c2 = std::sqrt(g.L2_2q * std::pow(g.c_p, 1.0 / g.p));
  g.c1 = 1.0 / std::sqrt(g.L2_2q_bar * std::pow(g.c_p_bar, 1.0 / g.p_bar));
  rep.within = rep.ratio >= g.c1 - 3.0 * rep.ratio_se && rep.ratio <= g.c2 + 3.0 * rep.ratio_se;
  return rep;
}

}  // namespace qbsde
