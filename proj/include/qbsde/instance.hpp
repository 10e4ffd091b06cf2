#pragma once

#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbsde/expr.hpp"
#include "qbsde/paths.hpp"
#include "qbsde/picard.hpp"

namespace qbsde {

/// A concrete system: generator, terminal map and constants.
struct ProblemInstance {
  std::string name;
  std::string description;
  SystemGenerator generator;
  TerminalMap xi;
  /// Closed-form Y at t0 = 0 for horizon T, when known.
  std::function<std::vector<double>(double T)> closed_form_y0;
  /// Suggested working window (local solves) and segment length (global).
  double working_epsilon = 0.25;
  double segment_length = 0.25;
};

inline constexpr int kInstanceSchemaVersion = 1;

/// Variable names of the expression language for (n, d):
/// t, W or W1..Wd, y1..yn, z1..zn (d = 1) or z1_1..zn_d.
std::vector<std::string> instance_variables(std::size_t n, std::size_t d);

/// Parses the `key = value` instance format. Required keys: schema_version,
/// n, d, T, C, gamma, xi1..xin, f1..fn; optional: name, alpha (0),
/// xi_bound (0), lipschitz_h (false), h1..hn (0). Throws ParseError with
/// line/column, ValidationError with the violating probe when declared
/// growth constants fail on `probes` random points.
ProblemInstance parse_instance(std::istream& in, std::size_t probes = 10000);
ProblemInstance parse_instance_file(const std::string& path, std::size_t probes = 10000);

}  // namespace qbsde
