#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qbsde/condexp.hpp"
#include "qbsde/field.hpp"
#include "qbsde/paths.hpp"

namespace qbsde {

/// Scalar generator f(t, W_t, z) with |f| ≤ C + γ/2|z|² and
/// |f(z1) − f(z2)| ≤ L(1+|z1|+|z2|)|z1−z2|.
class ScalarGenerator {
 public:
  using Fn = std::function<double(double t, std::span<const double> w, std::span<const double> z)>;

  /// Spot-checks the growth bound on `probes` deterministic random points
  /// (t in [0, horizon], |z| spread over 1e-3..1e3); throws ValidationError
  /// with the violating probe (t, w..., z...). probes = 0 skips the check.
  ScalarGenerator(Fn f, double C, double gamma, std::size_t d, double lipschitz = 0.0,
                  double horizon = 1.0, std::size_t probes = 256);

  /// γ/2 |z|².
  static ScalarGenerator pure_quadratic(double gamma, std::size_t d);
  static ScalarGenerator zero(std::size_t d);

  double operator()(double t, std::span<const double> w, std::span<const double> z) const {
    return f_(t, w, z);
  }
  double C() const noexcept { return C_; }
  double gamma() const noexcept { return gamma_; }
  double lipschitz() const noexcept { return lipschitz_; }
  std::size_t dim() const noexcept { return d_; }

 private:
  Fn f_;
  double C_;
  double gamma_;
  double lipschitz_;
  std::size_t d_;
};

/// Exogenous driver g on nodes × paths (dim 1); the value at the last node
/// is never used (left-endpoint rule).
using DriverField = AdaptedField;

DriverField zero_driver(const PathEnsemble& ensemble);
DriverField constant_driver(const PathEnsemble& ensemble, double value);

struct DriverDiagnostics {
  double sup_abs = 0.0;
  /// max over paths of ∫|g| ds.
  double max_integral = 0.0;
  /// Sample mean of e^{pγ∫|g|}; +inf when it overflows.
  double exp_moment = 1.0;
  bool finite = true;
};

DriverDiagnostics diagnose_driver(const DriverField& driver, const PathEnsemble& ensemble,
                                  double gamma, double p = 2.0);

struct ScalarSolveOptions {
  /// Quadratic-term truncation; default is 10× the a priori Z scale.
  std::optional<double> z_cap;
  /// Keep per-path regression standard errors of Y.
  bool track_se = false;
  double ridge = kDefaultRidge;
};

struct ScalarSolution {
  AdaptedField Y;  // nodes × paths × 1
  AdaptedField Z;  // nodes × paths × d; the last node is zero
  /// Empty unless track_se.
  AdaptedField y_se;
  std::size_t cap_hits = 0;
  double z_cap = 0.0;
  /// Deterministic bound |ξ|_∞ + (C + sup|g|)(T − t0) on |Y|.
  double a_priori_bound = 0.0;
  double y0 = 0.0;
  /// Monte Carlo standard error of Y at the first node.
  double y0_mc_se = 0.0;
};

/// Backward least-squares sweep for Y_t = ξ + ∫(f(Z) + g) ds − ∫Z dW.
/// Throws DivergenceError when max|Y| exceeds 10× the a priori bound.
ScalarSolution solve_scalar(const PathEnsemble& ensemble, const ScalarGenerator& gen,
                            const DriverField& driver, std::span<const double> xi,
                            const RegressionBasis& basis = RegressionBasis::polynomial(),
                            const ScalarSolveOptions& options = {});

struct ColeHopfSolution {
  AdaptedField Y;
  AdaptedField y_se;
};

/// Y_t = γ⁻¹ log E_t[exp(γ(ξ + ∫_t^T g ds))], the solution for f = γ/2|z|².
ColeHopfSolution cole_hopf_solve(const PathEnsemble& ensemble, double gamma,
                                 const DriverField& driver, std::span<const double> xi,
                                 const RegressionBasis& basis = RegressionBasis::polynomial());

struct APrioriReport {
  /// Per node: max over paths of (e^{γ|Y|} − rhs) / se.
  std::vector<double> node_violation_se;
  double max_violation_se = 0.0;
  std::size_t worst_node = 0;
  bool holds = true;  // max_violation_se ≤ 3
};

/// Checks e^{γ|Y_t|} ≤ E_t[e^{γ|ξ| + γ∫(c + |g|) ds}] node by node. The right
/// side is estimated backward through the tower property with the same
/// basis as the solve. `constant_c` is the growth constant C of f (zero
/// recovers the display without it). With `y_se` the violation unit is the
/// combined standard error of both sides.
APrioriReport a_priori_check(const AdaptedField& Y, const DriverField& driver,
                             std::span<const double> xi, double gamma,
                             const PathEnsemble& ensemble,
                             const RegressionBasis& basis = RegressionBasis::polynomial(),
                             double constant_c = 0.0, const AdaptedField* y_se = nullptr);

struct ComparisonReport {
  /// min over nodes/paths of (upper − lower).
  double min_gap = 0.0;
  /// min over nodes/paths of (upper − lower + tol).
  double min_slack = 0.0;
  std::size_t worst_node = 0;
  std::size_t worst_path = 0;
  bool holds = true;
};

/// Verifies upper ≥ lower − 5·sqrt(se_u² + se_l²) everywhere. Solutions
/// without tracked SEs use `floor_tol`.
ComparisonReport comparison_check(const ScalarSolution& lower, const ScalarSolution& upper,
                                  double floor_tol = 1e-9);

}  // namespace qbsde
