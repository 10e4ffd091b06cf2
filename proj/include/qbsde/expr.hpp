#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qbsde {

/// Arithmetic expression over named variables, compiled to RPN.
///
/// Grammar: + - * / ^ (right-assoc), unary minus, parentheses, |x| bars,
/// exp log sin cos tanh abs (one argument), min max (two arguments).
class Expression {
 public:
  /// Throws ParseError with the line and the column inside `text` shifted
  /// by `column_offset`.
  static Expression compile(std::string_view text, const std::vector<std::string>& variables,
                            std::size_t line = 1, std::size_t column_offset = 0);
  static Expression constant(double value);

  /// `vars` is indexed like the variable list given to compile.
  double operator()(std::span<const double> vars) const;

  /// Whether variable `index` appears.
  bool uses(std::size_t index) const;
  bool is_constant_zero() const;
  const std::string& source() const noexcept { return source_; }

  enum class Op : unsigned char {
    kConst, kVar, kNeg, kAdd, kSub, kMul, kDiv, kPow,
    kExp, kLog, kSin, kCos, kTanh, kAbs, kMin, kMax,
  };
  struct Instr {
    Op op;
    std::size_t index = 0;
    double value = 0.0;
  };

 private:
  std::vector<Instr> code_;
  std::string source_;
};

}  // namespace qbsde
