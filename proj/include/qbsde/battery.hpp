#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qbsde/bmo.hpp"
#include "qbsde/registry.hpp"
#include "qbsde/scalarq.hpp"

namespace qbsde {

struct BatteryOptions {
  double T = 1.0;
  std::size_t steps = 50;
  std::size_t paths = 20000;
  std::uint64_t seed = 1;
  /// Random integrands / (M, N) pairs per battery.
  std::size_t count = 20;
  RegressionBasis basis = RegressionBasis::polynomial();
  /// Basis for the scalar solves and the a priori check. Bins keep the
  /// projection positive, which the exponential-moment check relies on.
  RegressionBasis scalar_basis = RegressionBasis::bins(20);
};

struct ScalarBatteryResult {
  struct APriori {
    std::string name;
    APrioriReport report;
    std::size_t cap_hits = 0;
  };
  struct Comparison {
    std::string name;
    ComparisonReport report;
  };
  std::vector<APriori> a_priori;
  std::vector<Comparison> comparisons;
  bool all_hold = true;
};

ScalarBatteryResult run_scalar_battery(const BatteryOptions& options);

struct JohnNirenbergResult {
  struct Item {
    std::string label;
    JohnNirenbergReport report;
    /// Constant integrands only: closed-form sides e^{c²T} and 1/(1 − c²T).
    bool closed_form = false;
    double exact_lhs = 0.0;
    double exact_rhs = 0.0;
  };
  std::vector<Item> items;
  std::size_t applicable = 0;
  bool all_hold = true;
};

struct ReverseHolderResult {
  struct Item {
    std::string label;
    ReverseHolderReport report;
    bool closed_form = false;
    /// e^{p(p−1)c²T/2} and the explicit constant.
    double exact_lhs = 0.0;
    double exact_rhs = 0.0;
    /// |estimate at t0 − closed form| in standard errors.
    double moment_error_se = 0.0;
  };
  std::vector<Item> items;
  std::size_t applicable = 0;
  bool all_hold = true;
};

/// Constant integrands first, then `count` random ones meeting the norm
/// precondition by construction.
JohnNirenbergResult run_john_nirenberg_battery(const BatteryOptions& options);
ReverseHolderResult run_reverse_holder_battery(const BatteryOptions& options);

struct GirsanovBatteryResult {
  struct Item {
    std::string label_M;
    std::string label_N;
    GirsanovReport report;
  };
  double K = 0.5;
  std::vector<Item> items;
  /// N = 0: ratio and its SE.
  GirsanovReport zero_n;
  std::size_t applicable = 0;
  bool all_hold = true;
};

/// Random (M, N) with ‖N‖² ≤ K² by construction (sup|N|²T ≤ K²).
GirsanovBatteryResult run_girsanov_battery(const BatteryOptions& options, double K = 0.5);

}  // namespace qbsde
