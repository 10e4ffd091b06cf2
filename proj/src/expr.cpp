#include "qbsde/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>

#include "qbsde/error.hpp"

namespace qbsde {

namespace {

constexpr std::size_t kMaxStack = 64;

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars, std::size_t line,
         std::size_t offset)
      : s_(text), vars_(vars), line_(line), offset_(offset) {}

  std::vector<Expression::Instr> run() {
    skip();
    if (pos_ >= s_.size()) fail("empty expression");
    expr();
    skip();
    if (pos_ < s_.size()) fail(std::string("unexpected '") + s_[pos_] + "'");
    return std::move(out_);
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, line_, offset_ + pos_ + 1);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void emit(Op op, std::size_t index = 0, double value = 0.0) { out_.push_back({op, index, value}); }

  void expr() {
    term();
    for (;;) {
      if (eat('+')) {
        term();
        emit(Op::kAdd);
      } else if (eat('-')) {
        term();
        emit(Op::kSub);
      } else {
        return;
      }
    }
  }
  void term() {
    unary();
    for (;;) {
      if (eat('*')) {
        unary();
        emit(Op::kMul);
      } else if (eat('/')) {
        unary();
        emit(Op::kDiv);
      } else {
        return;
      }
    }
  }
  void unary() {
    if (eat('-')) {
      unary();
      emit(Op::kNeg);
      return;
    }
    if (eat('+')) {
      unary();
      return;
    }
    power();
  }
  void power() {
    primary();
    if (eat('^')) {
      unary();
      emit(Op::kPow);
    }
  }
  void primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      expr();
      if (!eat(')')) fail("expected ')'");
      return;
    }
    if (c == '|') {
      ++pos_;
      expr();
      if (!eat('|')) fail("expected closing '|'");
      emit(Op::kAbs);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      char* end = nullptr;
      const std::string tmp(s_.substr(pos_));
      const double v = std::strtod(tmp.c_str(), &end);
      const auto used = static_cast<std::size_t>(end - tmp.c_str());
      if (used == 0) fail("malformed number");
      pos_ += used;
      emit(Op::kConst, 0, v);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
        ++pos_;
      }
      const std::string name(s_.substr(start, pos_ - start));
      skip();
      if (pos_ < s_.size() && s_[pos_] == '(') {
        call(name, start);
        return;
      }
      for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i] == name) {
          emit(Op::kVar, i);
          return;
        }
      }
      pos_ = start;
      fail("unknown variable '" + name + "'");
    }
    fail(std::string("unexpected '") + c + "'");
  }
  void call(const std::string& name, std::size_t start) {
    static const std::array<std::pair<const char*, Op>, 6> unary_fns{{
        {"exp", Op::kExp}, {"log", Op::kLog}, {"sin", Op::kSin},
        {"cos", Op::kCos}, {"tanh", Op::kTanh}, {"abs", Op::kAbs},
    }};
    eat('(');
    for (const auto& [fname, op] : unary_fns) {
      if (name == fname) {
        expr();
        if (!eat(')')) fail("expected ')' after the argument of " + name);
        emit(op);
        return;
      }
    }
    if (name == "min" || name == "max") {
      expr();
      if (!eat(',')) fail(name + " takes two arguments");
      expr();
      if (!eat(')')) fail("expected ')' after the arguments of " + name);
      emit(name == "min" ? Op::kMin : Op::kMax);
      return;
    }
    pos_ = start;
    fail("unknown function '" + name + "'");
  }

  std::string_view s_;
  const std::vector<std::string>& vars_;
  std::size_t line_;
  std::size_t offset_;
  std::size_t pos_ = 0;
  std::vector<Expression::Instr> out_;
};

}  // namespace

Expression Expression::compile(std::string_view text, const std::vector<std::string>& variables,
                               std::size_t line, std::size_t column_offset) {
  Expression e;
  e.code_ = Parser(text, variables, line, column_offset).run();
  e.source_ = std::string(text);
  std::size_t depth = 0;
  std::size_t max_depth = 0;
  for (const Instr& in : e.code_) {
    switch (in.op) {
      case Op::kConst:
      case Op::kVar:
        ++depth;
        break;
      case Op::kAdd: case Op::kSub: case Op::kMul: case Op::kDiv:
      case Op::kPow: case Op::kMin: case Op::kMax:
        --depth;
        break;
      default:
        break;
    }
    max_depth = std::max(max_depth, depth);
  }
  if (max_depth > kMaxStack) throw ParseError("expression nests too deeply", line, column_offset + 1);
  return e;
}

Expression Expression::constant(double value) {
  Expression e;
  e.code_.push_back({Op::kConst, 0, value});
  e.source_ = std::to_string(value);
  return e;
}

double Expression::operator()(std::span<const double> vars) const {
  std::array<double, kMaxStack> st{};
  std::size_t sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::kConst: st[sp++] = in.value; break;
      case Op::kVar: st[sp++] = vars[in.index]; break;
      case Op::kNeg: st[sp - 1] = -st[sp - 1]; break;
      case Op::kAdd: --sp; st[sp - 1] += st[sp]; break;
      case Op::kSub: --sp; st[sp - 1] -= st[sp]; break;
      case Op::kMul: --sp; st[sp - 1] *= st[sp]; break;
      case Op::kDiv: --sp; st[sp - 1] /= st[sp]; break;
      case Op::kPow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
      case Op::kMin: --sp; st[sp - 1] = std::min(st[sp - 1], st[sp]); break;
      case Op::kMax: --sp; st[sp - 1] = std::max(st[sp - 1], st[sp]); break;
      case Op::kExp: st[sp - 1] = std::exp(st[sp - 1]); break;
      case Op::kLog: st[sp - 1] = std::log(st[sp - 1]); break;
      case Op::kSin: st[sp - 1] = std::sin(st[sp - 1]); break;
      case Op::kCos: st[sp - 1] = std::cos(st[sp - 1]); break;
      case Op::kTanh: st[sp - 1] = std::tanh(st[sp - 1]); break;
      case Op::kAbs: st[sp - 1] = std::abs(st[sp - 1]); break;
    }
  }
  return st[0];
}

bool Expression::uses(std::size_t index) const {
  for (const Instr& in : code_) {
    if (in.op == Op::kVar && in.index == index) return true;
  }
  return false;
}

bool Expression::is_constant_zero() const {
  return code_.size() == 1 && code_[0].op == Op::kConst && code_[0].value == 0.0;
}

}  // namespace qbsde
