#pragma once

#include <cstddef>
#include <optional>

namespace qbsde {

/// Growth/Lipschitz data of a diagonally quadratic system:
/// |f| ≤ C + γ/2|z|², |h| ≤ C(1+|y|+|z|^{1+α}), |ξ| ≤ xi_bound.
struct StructuralConstants {
  double C = 1.0;
  double gamma = 1.0;
  double alpha = 0.0;
  std::size_t n = 1;
  std::size_t d = 1;
  double T = 1.0;
  double xi_bound = 0.0;

  /// Throws InvalidArgument naming the first violated requirement.
  void validate() const;
};

// Exponential auxiliary function used in the a priori estimates.
double phi(double y, double gamma);
double phi_prime(double y, double gamma);
double phi_double_prime(double y, double gamma);

/// Φ(x) = {1 + x⁻² log((2x−1)/(2(x−1)))}^{1/2} − 1 for x > 1.
double capital_phi(double x);
/// Φ(1 + s) for s > 0, accurate for offsets far below double epsilon.
double capital_phi_offset(double s);

/// p > 1 with Φ(p) > K: the bisection root of Φ(p) = K(1 + 1e-3).
double find_p_for_threshold(double K);

/// δ_α = ½ γ^{2/(1−α)} δ^{−(1+α)/(1−α)} (1−α).
double delta_alpha(double gamma, double delta, double alpha);

/// Explicit reverse-Hölder constant for ‖M‖_{BMO₂} = b < Φ(p):
/// 2 / (1 − 2(p−1)/(2p−1)·exp(p²(b²+2b))).
double reverse_holder_constant(double p, double b);

enum class EpsilonBinding { kLipschitzCap, kExponentialCap, kUserOverride };

/// Constants of the local fixed-point argument. Stored in extended
/// precision: C_δ and ε routinely leave the double range.
struct LocalSolveParameters {
  long double C_delta = 0;
  long double log_C_delta = 0;
  long double beta = 0;
  long double mu1 = 0;
  long double mu2 = 0;
  long double mu = 0;
  long double delta = 0;
  long double epsilon = 0;
  /// Maximal admissible ε (the min of both caps), before any override.
  long double epsilon_max = 0;
  long double epsilon_lipschitz_cap = 0;
  long double epsilon_exponential_cap = 0;
  long double Delta = 0;
  long double A = 0;
  EpsilonBinding epsilon_binding = EpsilonBinding::kExponentialCap;

  /// e^{3nγ|ξ|/(1−α)}, as its logarithm.
  long double log_xi_factor = 0;
  /// Cnγ⁻²e^{γ|ξ|}.
  long double k_term = 0;

  /// Residual of δA² − (1+4kδ)A + 4k + 4μC_δEε relative to its largest term.
  long double quadratic_relative_residual() const;
  /// Relative error of k + μC_δEε/(1−δA) + A/4 = A/2.
  long double balance_relative_error() const;
  long double balance_lhs() const;
  long double balance_rhs() const { return A / 2; }
  /// log of C_δ e^{3nγ|ξ|/(1−α)} / (1−δA), the exponential U-bound of the ball.
  long double log_ball_u_bound() const;
};

/// Evaluates the local ledger at the maximal ε, or at `epsilon_override`
/// when given (must not exceed the maximum). Throws InvariantError naming
/// the failed inequality, OverflowError when an exponent leaves the range.
LocalSolveParameters local_parameters(const StructuralConstants& s,
                                      std::optional<double> epsilon_override = std::nullopt);

/// λ = (C'+1) e^{(C'+1)²(T−t)/2}, C' = max(C, |ξ|_∞); accepts C = 0.
double uniform_y_bound(double C, double xi_bound, double time_to_horizon);

struct GlobalSolveParameters {
  double lambda = 0;
  long double eta_lambda = 0;
  double z_bmo_bound = 0;
};

/// Z-BMO bound Cnφ'(λ)√T + √(2nφ(|ξ|) + 2Cnφ'(λ)(2+λ)T).
double z_bmo_bound(const StructuralConstants& s, double lambda);

/// Requires α = 0. η_λ is the local ε with xi_bound replaced by λ.
GlobalSolveParameters global_parameters(const StructuralConstants& s);

}  // namespace qbsde
