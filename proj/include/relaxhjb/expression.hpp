#ifndef RELAXHJB_EXPRESSION_HPP
#define RELAXHJB_EXPRESSION_HPP

#include <string>
#include <string_view>
#include <vector>

#include "relaxhjb/grid.hpp"

namespace relaxhjb {

// Closed-form coefficient expression in the state variables x1..xn.
//
// Grammar: numbers, the constants pi and e, variables x1..xn, binary
// + - * / ^ (right associative), unary minus, parentheses and the functions
// sin, cos, exp, log, sqrt, abs. The UTF-8 symbols U+00B7 and U+2212 are
// accepted for * and -.
class Expression {
 public:
  // Throws ArgumentError describing the offending column.
  static Expression parse(std::string_view text, int dim);

  static Expression constant(double value, int dim);

  double operator()(const Point& x) const;

  const std::string& source() const noexcept { return source_; }
  int dim() const noexcept { return dim_; }

 private:
  enum class Op { Push, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Log, Sqrt, Abs };
  struct Instr {
    Op op;
    double value = 0.0;
    int var = 0;
  };
  class Parser;

  std::string source_;
  int dim_ = 1;
  std::vector<Instr> program_;  // postfix
};

}  // namespace relaxhjb

#endif  // RELAXHJB_EXPRESSION_HPP
