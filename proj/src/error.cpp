#include "qbsde/error.hpp"

#include <cstdio>

namespace qbsde {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kOverflow: return "overflow";
    case ErrorCode::kInvariant: return "invariant";
    case ErrorCode::kRankDeficient: return "rank_deficient";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kNoConvergence: return "no_convergence";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kBoundViolation: return "bound_violation";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

namespace {

std::string overflow_message(const std::string& what, double exponent) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "overflow evaluating %s: exponent %.6g out of range",
                what.c_str(), exponent);
  return buf;
}

}  // namespace

OverflowError::OverflowError(const std::string& what_overflowed, double exponent)
    : Error(ErrorCode::kOverflow, overflow_message(what_overflowed, exponent)),
      exponent_(exponent) {}

InvariantError::InvariantError(std::string inequality, const std::string& detail)
    : Error(ErrorCode::kInvariant, "invariant failed: " + inequality + " (" + detail + ")"),
      inequality_(std::move(inequality)) {}

ParseError::ParseError(const std::string& message, std::size_t line, std::size_t column)
    : Error(ErrorCode::kParse, "line " + std::to_string(line) + ", column " +
                                   std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

}  // namespace qbsde
