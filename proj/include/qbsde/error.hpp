#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qbsde {

/// Machine-readable error codes; the CLI maps them to exit statuses.
enum class ErrorCode {
  kInvalidArgument = 2,
  kDomain = 3,
  kOverflow = 4,
  kInvariant = 5,
  kRankDeficient = 6,
  kDivergence = 7,
  kNoConvergence = 8,
  kParse = 9,
  kValidation = 10,
  kBoundViolation = 11,
  kIo = 12,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error(ErrorCode::kInvalidArgument, message) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message)
      : Error(ErrorCode::kDomain, message) {}
};

/// Raised when an exponential leaves the representable range.
class OverflowError : public Error {
 public:
  OverflowError(const std::string& what_overflowed, double exponent);

  double exponent() const noexcept { return exponent_; }

 private:
  double exponent_;
};

/// A required inequality between computed quantities failed.
class InvariantError : public Error {
 public:
  InvariantError(std::string inequality, const std::string& detail);

  const std::string& inequality() const noexcept { return inequality_; }

 private:
  std::string inequality_;
};

class RankDeficientError : public Error {
 public:
  explicit RankDeficientError(const std::string& message)
      : Error(ErrorCode::kRankDeficient, message) {}
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, double observed, double limit)
      : Error(ErrorCode::kDivergence, message), observed_(observed), limit_(limit) {}

  double observed() const noexcept { return observed_; }
  double limit() const noexcept { return limit_; }

 private:
  double observed_;
  double limit_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A declared growth bound failed on a probe point.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& message, std::vector<double> probe)
      : Error(ErrorCode::kValidation, message), probe_(std::move(probe)) {}

  const std::vector<double>& probe() const noexcept { return probe_; }

 private:
  std::vector<double> probe_;
};

class BoundViolation : public Error {
 public:
  BoundViolation(const std::string& message, double observed, double bound)
      : Error(ErrorCode::kBoundViolation, message), observed_(observed), bound_(bound) {}

  double observed() const noexcept { return observed_; }
  double bound() const noexcept { return bound_; }

 private:
  double observed_;
  double bound_;
};

}  // namespace qbsde
