#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qbsde/bmo.hpp"
#include "qbsde/instance.hpp"
#include "qbsde/scalarq.hpp"

namespace qbsde {

struct InstanceInfo {
  std::string id;
  std::string description;
};

/// Built-in systems and lemma batteries, in display order.
std::vector<InstanceInfo> list_instances();

/// Throws InvalidArgument for an unknown id.
ProblemInstance builtin_instance(const std::string& id);

/// Built-in id, or else a path to an instance file.
ProblemInstance resolve_instance(const std::string& id_or_path, std::size_t probes = 10000);

// Scalar battery ------------------------------------------------------------

/// One scalar problem on [0, T] with d = 1.
struct ScalarCase {
  std::string name;
  ScalarGenerator f;
  std::function<double(double w_T)> xi;
  /// Exogenous driver g(t, W_t).
  std::function<double(double t, double w)> g;
};

/// Ordered pair (lower, upper) with f_lower ≤ f_upper and ξ_lower ≤ ξ_upper.
struct ComparisonCase {
  std::string name;
  ScalarCase lower;
  ScalarCase upper;
};

std::vector<ScalarCase> scalar_battery();
std::vector<ComparisonCase> comparison_battery();

/// Evaluates a case's driver and terminal values on an ensemble.
DriverField case_driver(const ScalarCase& c, const PathEnsemble& ensemble);
std::vector<double> case_terminal(const ScalarCase& c, const PathEnsemble& ensemble);

// Integrand batteries --------------------------------------------------------

enum class IntegrandShape { kConstant, kPositivePart, kTanh, kCos };

/// β_s = levels[j]·shape(W_s) in the first coordinate, with j the index of
/// the equal time piece containing s. |shape| ≤ 1, so |β| ≤ sup().
struct IntegrandSpec {
  std::vector<double> levels;
  IntegrandShape shape = IntegrandShape::kConstant;

  double sup() const;
  std::string label() const;
};

IntegrandField make_integrand(const PathEnsemble& ensemble, const IntegrandSpec& spec);

/// `count` deterministic random specs with sup() ≤ max_sup.
std::vector<IntegrandSpec> random_integrands(std::size_t count, std::uint64_t seed, double max_sup);

}  // namespace qbsde
