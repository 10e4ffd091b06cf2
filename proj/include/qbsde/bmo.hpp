#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qbsde/condexp.hpp"
#include "qbsde/field.hpp"
#include "qbsde/paths.hpp"

namespace qbsde {

/// Integrand β of β·W on nodes × paths × k. For quadratic variation any k
/// is accepted (|β|² sums a row, so an n×d Z flattened row-wise works);
/// stochastic exponentials need k = d. The last node is never used.
using IntegrandField = AdaptedField;

/// β ≡ c in the first Brownian coordinate.
IntegrandField constant_integrand(const PathEnsemble& ensemble, double c);

struct BmoEstimate {
  double norm_sq = 0.0;
  /// Max over paths of the smoothed E_t[∫_t^T |β|² ds], per node.
  std::vector<double> per_node_ess_sup;
  /// Regression standard error at the maximizing path, per node.
  std::vector<double> per_node_se;
  std::size_t argmax_node = 0;

  double norm() const;
  /// Standard error of norm_sq (the SE at the maximizing node).
  double se() const { return per_node_se.empty() ? 0.0 : per_node_se[argmax_node]; }
};

/// Deterministic-time BMO₂ estimate sup_t esssup E_t[∫_t^T |β|² ds]. With
/// weights w (typically ℰ(N)_0^T) the expectation is under w·dP.
BmoEstimate bmo2_norm(const PathEnsemble& ensemble, const IntegrandField& integrand,
                      const RegressionBasis& basis = RegressionBasis::polynomial(),
                      std::span<const double> weights = {});

/// log ℰ(β·W)_{from}^{to} per path, left-endpoint rule.
std::vector<double> log_stochastic_exponential(const PathEnsemble& ensemble,
                                               const IntegrandField& integrand,
                                               std::size_t from_node, std::size_t to_node);
/// ℰ(β·W)_{from}^{to}; OverflowError when an exponent leaves double range.
std::vector<double> stochastic_exponential(const PathEnsemble& ensemble,
                                           const IntegrandField& integrand, std::size_t from_node,
                                           std::size_t to_node);

struct InequalityReport {
  bool applicable = true;
  std::string reason;  // set when not applicable
  /// Max over paths of the estimated left side, per node.
  std::vector<double> node_estimate;
  std::vector<double> node_se;
  double bound = 0.0;
  /// min over nodes of bound − estimate.
  double worst_slack = 0.0;
  /// max over nodes of (estimate − bound) / se (−inf when never violated).
  double worst_violation_se = 0.0;
  bool holds = true;
};

struct JohnNirenbergReport : InequalityReport {
  double norm_sq = 0.0;
};

/// E_t[e^{⟨M⟩_t^T}] ≤ 1/(1 − ‖M‖²) at every node, within 3 standard errors.
JohnNirenbergReport john_nirenberg_check(const PathEnsemble& ensemble,
                                         const IntegrandField& integrand,
                                         const RegressionBasis& basis = RegressionBasis::polynomial());

struct ReverseHolderReport : InequalityReport {
  double p = 0.0;
  double norm = 0.0;
  double phi_p = 0.0;
  /// Max over nodes of the estimated E_t[(ℰ(M)_t^T)^p].
  double empirical_c_p = 0.0;
};

/// E_t[(ℰ(M)_t^T)^p] ≤ c_p with c_p the explicit constant for ‖M‖ < Φ(p).
ReverseHolderReport reverse_holder_check(const PathEnsemble& ensemble,
                                         const IntegrandField& integrand, double p,
                                         const RegressionBasis& basis = RegressionBasis::polynomial());

/// Empirical L_p² := sup_t esssup E_t[(⟨M⟩_t^T)^{p/2}]^{2/p} / ‖M‖²_{BMO₂}, the
/// squared norm-equivalence ratio. Weighted like bmo2_norm. Zero-norm
/// integrands give 1.
double norm_equivalence_ratio(const PathEnsemble& ensemble, const IntegrandField& integrand,
                              double p, const RegressionBasis& basis = RegressionBasis::polynomial(),
                              std::span<const double> weights = {});

struct GirsanovBounds {
  double K = 0.0;
  double p = 0.0;
  double q = 0.0;
  double c_p = 0.0;
  double K_bar = 0.0;
  double p_bar = 0.0;
  double q_bar = 0.0;
  double c_p_bar = 0.0;
  /// Empirical L²_{2q} under P and L̃²_{2q̄} under P̃.
  double L2_2q = 0.0;
  double L2_2q_bar = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

struct GirsanovReport {
  bool applicable = true;
  std::string reason;
  double norm_N = 0.0;
  double norm_M = 0.0;
  /// ‖M − ⟨M,N⟩‖ under dP̃ = ℰ(N)_0^T dP.
  double norm_M_tilde = 0.0;
  double ratio = 0.0;
  double ratio_se = 0.0;
  bool within = false;
  GirsanovBounds bounds;
};

/// c₁‖M‖ ≤ ‖M̃‖_{P̃} ≤ c₂‖M‖ for ‖N‖ ≤ K, with (c₁, c₂) assembled from the
/// reverse-Hölder chain.
GirsanovReport girsanov_bmo_equivalence(const PathEnsemble& ensemble, const IntegrandField& M,
                                        const IntegrandField& N, double K,
                                        const RegressionBasis& basis = RegressionBasis::polynomial());

}  // namespace qbsde
