#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "qbsde/condexp.hpp"
#include "qbsde/globalsolve.hpp"

namespace qbsde {

inline constexpr const char* kVersion = "0.4.0";

struct RunConfig {
  /// constants | solve-local | solve-global | verify-lemmas | list-instances
  std::string command;
  /// Built-in id or instance file path.
  std::string instance = "coupled-quadratic";
  SolveMode mode = SolveMode::kWorking;
  std::size_t steps = 50;
  std::size_t paths = 20000;
  std::uint64_t seed = 1;
  BasisKind basis = BasisKind::kPolynomial;
  /// Polynomial degree, or number of bins.
  std::size_t basis_order = 5;
  double tol = 1e-6;
  std::size_t max_iter = 50;
  /// Local window length; defaults to the instance's working ε (working
  /// mode) or the certified ε.
  std::optional<double> epsilon;
  /// Working-mode segment length for solve-global.
  std::optional<double> segment_length;
  double eta_floor = 1e-6;
  /// solve-global: also run the uniqueness probe (three extra solves).
  bool uniqueness = false;
  /// verify-lemmas: random integrands per battery.
  std::size_t battery_count = 20;
  std::size_t probes = 10000;
  std::string out_dir = "qbsde-out";

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
  RegressionBasis regression_basis() const;
};

/// Reads `key = value` lines (keys as the field names; mode is
/// certified|working, basis is poly|bins). Throws ParseError.
RunConfig load_run_config(const std::string& path);

/// Executes one command, writing summary.json, manifest.json and, for the
/// solvers, trace.csv and solution.csv under out_dir. list-instances
/// prints to `out`. Errors are reported as one JSON line on `err`; the
/// return value is 0, 1 when a verification did not hold, or the error code.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace qbsde
