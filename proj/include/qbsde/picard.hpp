#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbsde/condexp.hpp"
#include "qbsde/constants.hpp"
#include "qbsde/error.hpp"
#include "qbsde/field.hpp"
#include "qbsde/paths.hpp"
#include "qbsde/scalarq.hpp"

namespace qbsde {

/// g^i(t, y, z) = f^i(t, z^i) + h^i(t, y, z) with z an n×d matrix stored
/// row-major (row i is the Z of component i).
class SystemGenerator {
 public:
  using HFn = std::function<void(double t, std::span<const double> w, std::span<const double> y,
                                 std::span<const double> z, std::span<double> out)>;

  /// An empty `h` means no coupling. Probes h against
  /// |h| ≤ C(1+|y|+|z|^{1+α}) and its Lipschitz bound, or the Lipschitz
  /// variant |h| ≤ C(1+|y|+|z|), |Δh| ≤ C(|Δy|+|Δz|) when `lipschitz_h`.
  SystemGenerator(std::vector<ScalarGenerator> f, HFn h, StructuralConstants structural,
                  bool lipschitz_h = false, std::size_t probes = 256);

  std::size_t n() const noexcept { return f_.size(); }
  std::size_t d() const noexcept { return structural_.d; }
  const ScalarGenerator& f(std::size_t i) const { return f_.at(i); }
  const StructuralConstants& structural() const noexcept { return structural_; }
  bool coupled() const noexcept { return static_cast<bool>(h_); }
  bool lipschitz_h() const noexcept { return lipschitz_h_; }

  /// Writes h(t, w, y, z) into out (zero when uncoupled).
  void h(double t, std::span<const double> w, std::span<const double> y,
         std::span<const double> z, std::span<double> out) const;

  /// Same generator with a different terminal bound in its constants.
  SystemGenerator with_xi_bound(double xi_bound) const;

 private:
  std::vector<ScalarGenerator> f_;
  HFn h_;
  StructuralConstants structural_;
  bool lipschitz_h_;
};

/// Candidate (U, V): U is nodes × paths × n, V is nodes × paths × (n·d).
struct BallState {
  AdaptedField U;
  AdaptedField V;
};

struct BallMetrics {
  double v_bmo_sq = 0.0;
  double u_sup = 0.0;
};

BallMetrics measure_state(const BallState& state, const PathEnsemble& ensemble,
                          const RegressionBasis& basis = RegressionBasis::polynomial());

struct BallMembership {
  bool member = false;
  bool v_inside = false;
  bool u_inside = false;
  /// A − ‖V·W‖².
  double v_margin = 0.0;
  /// log bound − 2nγ|U|_∞/(1−α); the U inequality in log form.
  double log_u_margin = 0.0;
};

BallMembership ball_membership(const BallMetrics& metrics, const LocalSolveParameters& params,
                               const StructuralConstants& structural);

/// Sup bound on |Y| for Γ of a ball member: (1−α)/(2γ)·log(C_δe^{3nγ|ξ|/(1−α)}/(1−δA)).
double step2_y_bound(const LocalSolveParameters& params, const StructuralConstants& structural);

struct GammaOptions {
  RegressionBasis basis = RegressionBasis::polynomial();
  std::optional<double> z_cap;
  bool track_se = false;
};

struct GammaResult {
  AdaptedField Y;
  AdaptedField Z;
  AdaptedField y_se;  // empty unless track_se
  std::vector<double> y0;
  std::vector<double> y0_mc_se;
  std::size_t cap_hits = 0;
};

/// Γ(U, V): n decoupled scalar solves with frozen drivers h^i(·, U, V).
/// Scalar divergence is rethrown naming the component.
GammaResult gamma_map(const BallState& state, const SystemGenerator& gen, const PathVectors& xi,
                      const PathEnsemble& ensemble, const GammaOptions& options = {});

enum class InitialGuess { kConditionalMean, kZero };

BallState initial_state(InitialGuess guess, const PathVectors& xi, const PathEnsemble& ensemble,
                        std::size_t d, const RegressionBasis& basis = RegressionBasis::polynomial());

struct IterationRecord {
  std::size_t iteration = 0;
  double y_dist_sup = 0.0;
  double z_dist_bmo = 0.0;
  /// max(y, z) distance over the previous one; NaN at iteration 1.
  double ratio = 0.0;
  bool in_ball = false;
  BallMembership membership;
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  bool non_contraction = false;  // some ratio ≥ 1
};

struct BsdeSolution {
  AdaptedField Y;
  AdaptedField Z;
  AdaptedField y_se;
  std::vector<double> y0;
  std::vector<double> y0_mc_se;
  double z_bmo_sq = 0.0;
  double y_sup = 0.0;
  std::size_t cap_hits = 0;
};

struct LocalSolveOptions {
  double tol = 1e-6;
  std::size_t max_iter = 50;
  /// Certified mode requires the window to be no longer than the certified ε.
  bool certified = false;
  InitialGuess initial = InitialGuess::kConditionalMean;
  /// Used instead of `initial` when set.
  std::optional<BallState> initial_state;
  GammaOptions gamma;
  /// Apply Γ once more at the end and report the fixed-point residual.
  bool residual_check = true;
};

struct LocalSolveResult {
  BsdeSolution solution;
  IterationTrace trace;
  std::size_t iterations = 0;
  /// max(sup|Y − Γ(Y)|, ‖(Z − Γ(Z))·W‖) or NaN when not checked.
  double fixed_point_residual = 0.0;
  LocalSolveParameters certified_params;
  double window = 0.0;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, IterationTrace trace)
      : Error(ErrorCode::kNoConvergence, message), trace_(std::move(trace)) {}

  const IterationTrace& trace() const noexcept { return trace_; }

 private:
  IterationTrace trace_;
};

/// Picard iteration of Γ on the ensemble's window. Ball flags use the
/// certified ledger of the generator's structural constants.
LocalSolveResult local_solve(const SystemGenerator& gen, const PathVectors& xi,
                             const PathEnsemble& ensemble, const LocalSolveOptions& options = {});

struct ContractionReport {
  bool identity_input = false;
  /// |U−Ũ|²_∞ + ‖(V−Ṽ)·W‖².
  double input_dist_sq = 0.0;
  double output_dist_sq = 0.0;
  /// output/input; NaN for identity input.
  double ratio = 0.0;
  /// ‖β(i)·W‖² per component, with β(i) the difference quotient of f^i.
  std::vector<double> beta_bmo_sq;
  /// 3C²T + 6C²A with A from the certified ledger.
  double beta_bound_sq = 0.0;
};

ContractionReport contraction_probe(const BallState& a, const BallState& b,
                                    const SystemGenerator& gen, const PathVectors& xi,
                                    const PathEnsemble& ensemble,
                                    const GammaOptions& options = {});

}  // namespace qbsde
