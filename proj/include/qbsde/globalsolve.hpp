#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "qbsde/constants.hpp"
#include "qbsde/picard.hpp"

namespace qbsde {

enum class SolveMode { kCertified, kWorking };

/// Breakpoints T = τ_0 > τ_1 > … > τ_m = t0, each gap ≤ eta; all gaps equal
/// eta except possibly the earliest.
struct StitchPlan {
  std::vector<double> breakpoints;
  long double eta = 0;

  std::size_t num_segments() const { return breakpoints.empty() ? 0 : breakpoints.size() - 1; }
  std::vector<double> segment_lengths() const;
};

StitchPlan plan_stitch(double t0, double T, long double eta);

/// Certified plan with η_λ from global_parameters. Throws InvalidArgument
/// recommending working mode when η_λ < floor.
StitchPlan plan_stitch(const StructuralConstants& structural, double floor = 1e-6);

struct SegmentReport {
  std::size_t first_node = 0;
  std::size_t last_node = 0;
  std::size_t iterations = 0;
  IterationTrace trace;
  double fixed_point_residual = 0.0;
  /// sup|Y| at the segment's first node, and the time-dependent λ there.
  double seam_y_sup = 0.0;
  double seam_lambda = 0.0;
};

struct GlobalSolveOptions {
  SolveMode mode = SolveMode::kWorking;
  /// Working-mode segment length (rounded down to whole grid steps).
  double segment_length = 0.25;
  double eta_floor = 1e-6;
  LocalSolveOptions local;
  /// Added to 5 regression SEs when enforcing the λ bound.
  double bound_slack = 1e-9;
};

struct GlobalSolution {
  AdaptedField Y;  // full grid × paths × n
  AdaptedField Z;  // full grid × paths × (n·d)
  std::vector<SegmentReport> segments;
  StitchPlan plan;
  double lambda = 0.0;
  double z_bmo_sq = 0.0;
  std::vector<double> y0;
  /// Pathwise Monte Carlo SE of Y_0 over the whole horizon.
  std::vector<double> y0_mc_se;
  /// |Y(τ⁺) − Y(τ⁻)| per inner breakpoint (terminal data handed across).
  std::vector<double> seam_jumps;
  double y_sup = 0.0;
};

/// Backward stitching of local solves on one ensemble over [t0, T]. Needs
/// α = 0. Throws BoundViolation when |Y| exceeds the uniform bound at a seam.
GlobalSolution global_solve(const SystemGenerator& gen, const TerminalMap& xi,
                            const PathEnsemble& ensemble, const GlobalSolveOptions& options = {});

struct ZBmoReport {
  double estimate = 0.0;  // ‖Z·W‖, not squared
  double bound = 0.0;
  double slack = 0.0;
  bool holds = true;
};

ZBmoReport z_bmo_report(const GlobalSolution& solution, const StructuralConstants& structural);

struct UniquenessReport {
  /// Same ensemble, two Picard initializations.
  double y_sup_distance = 0.0;
  double z_bmo_distance = 0.0;
  double same_tolerance = 0.0;
  /// Second seed: max over components of |ΔY_0| and its tolerance 5·SE.
  double y0_seed_distance = 0.0;
  double seed_tolerance = 0.0;
  bool passes = false;
};

/// Re-solves with the zero initialization (and `other` ensemble for the
/// second seed) and compares against the conditional-mean start. `gen_b`
/// replaces the generator of the second runs (harness self-test).
UniquenessReport uniqueness_probe(const SystemGenerator& gen, const TerminalMap& xi,
                                  const PathEnsemble& ensemble, const PathEnsemble& other,
                                  const GlobalSolveOptions& options = {},
                                  const SystemGenerator* gen_b = nullptr);

}  // namespace qbsde
