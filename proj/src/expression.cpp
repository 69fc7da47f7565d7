#include "relaxhjb/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

#include "relaxhjb/errors.hpp"

namespace relaxhjb {

class Expression::Parser {
 public:
  Parser(std::string text, int dim, std::vector<Instr>& out)
      : text_(normalise(std::move(text))), dim_(dim), out_(out) {}

  void run() {
    parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
  }

 private:
  static std::string normalise(std::string s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto c = static_cast<unsigned char>(s[i]);
      if (c == 0xC2 && i + 1 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0xB7) {
        out.push_back('*');
        i += 1;
      } else if (c == 0xE2 && i + 2 < s.size() &&
                 static_cast<unsigned char>(s[i + 1]) == 0x88 &&
                 static_cast<unsigned char>(s[i + 2]) == 0x92) {
        out.push_back('-');
        i += 2;
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ArgumentError("expression '" + text_ + "', column " + std::to_string(pos_ + 1) +
                        ": " + what);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit(Op op, double value = 0.0, int var = 0) { out_.push_back({op, value, var}); }

  void parse_sum() {
    parse_product();
    for (;;) {
      if (accept('+')) {
        parse_product();
        emit(Op::Add);
      } else if (accept('-')) {
        parse_product();
        emit(Op::Sub);
      } else {
        return;
      }
    }
  }

  void parse_product() {
    parse_unary();
    for (;;) {
      if (accept('*')) {
        parse_unary();
        emit(Op::Mul);
      } else if (accept('/')) {
        parse_unary();
        emit(Op::Div);
      } else {
        return;
      }
    }
  }

  // Unary minus binds looser than ^, so -x^2 == -(x^2).
  void parse_unary() {
    if (accept('-')) {
      parse_unary();
      emit(Op::Neg);
      return;
    }
    if (accept('+')) {
      parse_unary();
      return;
    }
    parse_power();
  }

  void parse_power() {
    parse_atom();
    if (accept('^')) {
      parse_unary();
      emit(Op::Pow);
    }
  }

  void parse_atom() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      parse_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      parse_identifier();
      return;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  void parse_number() {
    double value = 0.0;
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc()) fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - begin);
    emit(Op::Push, value);
  }

  void parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string name = text_.substr(start, pos_ - start);
    if (name == "pi") return emit(Op::Push, std::numbers::pi);
    if (name == "e") return emit(Op::Push, std::numbers::e);
    if (name.size() >= 2 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int var = std::stoi(name.substr(1));
      if (var < 1 || var > dim_) fail("variable " + name + " out of range");
      return emit(Op::Var, 0.0, var - 1);
    }
    Op fn;
    if (name == "sin") fn = Op::Sin;
    else if (name == "cos") fn = Op::Cos;
    else if (name == "exp") fn = Op::Exp;
    else if (name == "log") fn = Op::Log;
    else if (name == "sqrt") fn = Op::Sqrt;
    else if (name == "abs") fn = Op::Abs;
    else fail("unknown identifier '" + name + "'");
    if (!accept('(')) fail("expected '(' after " + name);
    parse_sum();
    if (!accept(')')) fail("expected ')'");
    emit(fn);
  }

  std::string text_;
  std::size_t pos_ = 0;
  int dim_;
  std::vector<Instr>& out_;
};

Expression Expression::parse(std::string_view text, int dim) {
  Expression e;
  e.source_ = std::string(text);
  e.dim_ = dim;
  Parser(std::string(text), dim, e.program_).run();
  int depth = 0;
  for (const Instr& in : e.program_) {
    if (in.op == Op::Push || in.op == Op::Var) ++depth;
    else if (in.op <= Op::Pow) --depth;
    if (depth > 64) throw ArgumentError("expression '" + e.source_ + "' nests too deeply");
  }
  return e;
}

Expression Expression::constant(double value, int dim) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return parse(std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)), dim);
}

double Expression::operator()(const Point& x) const {
  double stack[64];
  int top = 0;
  for (const Instr& in : program_) {
    switch (in.op) {
      case Op::Push: stack[top++] = in.value; break;
      case Op::Var: stack[top++] = x[in.var]; break;
      case Op::Add: --top; stack[top - 1] += stack[top]; break;
      case Op::Sub: --top; stack[top - 1] -= stack[top]; break;
      case Op::Mul: --top; stack[top - 1] *= stack[top]; break;
      case Op::Div: --top; stack[top - 1] /= stack[top]; break;
      case Op::Pow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
      case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
      case Op::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
      case Op::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
      case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
      case Op::Log: stack[top - 1] = std::log(stack[top - 1]); break;
      case Op::Sqrt: stack[top - 1] = std::sqrt(stack[top - 1]); break;
      case Op::Abs: stack[top - 1] = std::abs(stack[top - 1]); break;
    }
  }
  return stack[0];
}

}  // namespace relaxhjb
