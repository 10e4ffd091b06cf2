#include "qbsde/battery.hpp"

#include <cmath>

#include "qbsde/constants.hpp"
#include "qbsde/error.hpp"

namespace qbsde {

namespace {

PathEnsemble battery_paths(const BatteryOptions& o, std::uint64_t salt) {
  return simulate_brownian(make_grid(0.0, o.T, o.steps), o.paths, 1, o.seed + salt);
}

ScalarSolution solve_case(const ScalarCase& c, const PathEnsemble& ens, const RegressionBasis& basis) {
  ScalarSolveOptions so;
  so.track_se = true;
  return solve_scalar(ens, c.f, case_driver(c, ens), case_terminal(c, ens), basis, so);
}

}  // namespace

ScalarBatteryResult run_scalar_battery(const BatteryOptions& options) {
  ScalarBatteryResult out;
  const PathEnsemble ens = battery_paths(options, 0);
  for (const ScalarCase& c : scalar_battery()) {
    const ScalarSolution sol = solve_case(c, ens, options.scalar_basis);
    ScalarBatteryResult::APriori item{c.name,
                                      a_priori_check(sol.Y, case_driver(c, ens), case_terminal(c, ens),
                                                     c.f.gamma(), ens, options.scalar_basis, c.f.C(),
                                                     &sol.y_se),
                                      sol.cap_hits};
    out.all_hold = out.all_hold && item.report.holds;
    out.a_priori.push_back(std::move(item));
  }
  for (const ComparisonCase& c : comparison_battery()) {
    const ScalarSolution lo = solve_case(c.lower, ens, options.scalar_basis);
    const ScalarSolution up = solve_case(c.upper, ens, options.scalar_basis);
    ScalarBatteryResult::Comparison item{c.name, comparison_check(lo, up)};
    out.all_hold = out.all_hold && item.report.holds;
    out.comparisons.push_back(std::move(item));
  }
  return out;
}

JohnNirenbergResult run_john_nirenberg_battery(const BatteryOptions& options) {
  JohnNirenbergResult out;
  const PathEnsemble ens = battery_paths(options, 1);
  const double T = options.T;
  for (double c : {0.0, 0.3, 0.6, 0.9}) {
    c /= std::sqrt(T);
    JohnNirenbergResult::Item item;
    item.label = "const " + std::to_string(c);
    item.report = john_nirenberg_check(ens, constant_integrand(ens, c), options.basis);
    item.closed_form = true;
    item.exact_lhs = std::exp(c * c * T);
    item.exact_rhs = 1.0 / (1.0 - c * c * T);
    const bool ok = item.report.applicable && item.report.holds && item.exact_lhs <= item.exact_rhs;
    out.all_hold = out.all_hold && ok;
    out.applicable += item.report.applicable ? 1 : 0;
    out.items.push_back(std::move(item));
  }
  for (const IntegrandSpec& spec : random_integrands(options.count, options.seed, 0.9 / std::sqrt(T))) {
    JohnNirenbergResult::Item item;
    item.label = spec.label();
    item.report = john_nirenberg_check(ens, make_integrand(ens, spec), options.basis);
    if (item.report.applicable) {
      ++out.applicable;
      out.all_hold = out.all_hold && item.report.holds;
    }
    out.items.push_back(std::move(item));
  }
  return out;
}

ReverseHolderResult run_reverse_holder_battery(const BatteryOptions& options) {
  ReverseHolderResult out;
  const PathEnsemble ens = battery_paths(options, 2);
  const double T = options.T;
  auto exponent_for = [&](double sup) {
    const double b = sup * std::sqrt(T);
    return b > 0.0 ? find_p_for_threshold(2.0 * b) : 2.0;
  };
  for (double c : {0.0, 0.1, 0.2, 0.4}) {
    c /= std::sqrt(T);
    ReverseHolderResult::Item item;
    item.label = "const " + std::to_string(c);
    const double p = exponent_for(c);
    item.report = reverse_holder_check(ens, constant_integrand(ens, c), p, options.basis);
    item.closed_form = true;
    item.exact_lhs = std::exp(0.5 * p * (p - 1.0) * c * c * T);
    item.exact_rhs = reverse_holder_constant(p, c * std::sqrt(T));
    const double se0 = item.report.node_se.empty() ? 0.0 : item.report.node_se[0];
    const double err = item.report.node_estimate.empty() ? 0.0
                                                         : std::abs(item.report.node_estimate[0] - item.exact_lhs);
    item.moment_error_se = se0 > 0.0 ? err / se0 : (err > 1e-12 ? INFINITY : 0.0);
    const bool ok = item.report.applicable && item.report.holds && item.exact_lhs <= item.exact_rhs;
    out.all_hold = out.all_hold && ok;
    out.applicable += item.report.applicable ? 1 : 0;
    out.items.push_back(std::move(item));
  }
  for (const IntegrandSpec& spec : random_integrands(options.count, options.seed + 17, 0.4 / std::sqrt(T))) {
    ReverseHolderResult::Item item;
    item.label = spec.label();
    item.report = reverse_holder_check(ens, make_integrand(ens, spec), exponent_for(spec.sup()), options.basis);
    if (item.report.applicable) {
      ++out.applicable;
      out.all_hold = out.all_hold && item.report.holds;
    }
    out.items.push_back(std::move(item));
  }
  return out;
}

GirsanovBatteryResult run_girsanov_battery(const BatteryOptions& options, double K) {
  GirsanovBatteryResult out;
  out.K = K;
  const PathEnsemble ens = battery_paths(options, 3);
  const auto ms = random_integrands(options.count, options.seed + 101, 1.0);
  const auto ns = random_integrands(options.count, options.seed + 202, K / std::sqrt(options.T));
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const IntegrandSpec& n = ns[(i + 1) % ns.size()];
    GirsanovBatteryResult::Item item{ms[i].label(), n.label(), {}};
    item.report = girsanov_bmo_equivalence(ens, make_integrand(ens, ms[i]), make_integrand(ens, n), K,
                                           options.basis);
    if (item.report.applicable) {
      ++out.applicable;
      out.all_hold = out.all_hold && item.report.within;
    }
    out.items.push_back(std::move(item));
  }
  if (!ms.empty()) {
    out.zero_n = girsanov_bmo_equivalence(ens, make_integrand(ens, ms[0]), constant_integrand(ens, 0.0), K,
                                          options.basis);
    out.all_hold = out.all_hold && out.zero_n.within &&
                   std::abs(out.zero_n.ratio - 1.0) <= 2.0 * out.zero_n.ratio_se + 1e-12;
  }
  return out;
}

}  // namespace qbsde
