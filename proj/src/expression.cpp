#include "xtend/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <vector>

#include "xtend/error.hpp"

namespace xtend {

struct Expression::Node {
  enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
  Op op = Op::Const;
  double value = 0.0;
  double (*fn)(double) = nullptr;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(double x) const {
    switch (op) {
      case Op::Const: return value;
      case Op::Var: return x;
      case Op::Neg: return -lhs->eval(x);
      case Op::Add: return lhs->eval(x) + rhs->eval(x);
      case Op::Sub: return lhs->eval(x) - rhs->eval(x);
      case Op::Mul: return lhs->eval(x) * rhs->eval(x);
      case Op::Div: return lhs->eval(x) / rhs->eval(x);
      case Op::Pow: return std::pow(lhs->eval(x), rhs->eval(x));
      case Op::Call: return fn(lhs->eval(x));
    }
    return 0.0;
  }

  bool uses_var() const {
    if (op == Op::Var) return true;
    return (lhs && lhs->uses_var()) || (rhs && rhs->uses_var());
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, NodePtr l = nullptr, NodePtr r = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->lhs = std::move(l);
  n->rhs = std::move(r);
  return n;
}

NodePtr make_const(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->value = v;
  return n;
}

double f_sin(double v) { return std::sin(v); }
double f_cos(double v) { return std::cos(v); }
double f_tan(double v) { return std::tan(v); }
double f_exp(double v) { return std::exp(v); }
double f_log(double v) { return std::log(v); }
double f_sqrt(double v) { return std::sqrt(v); }
double f_abs(double v) { return std::abs(v); }
double f_tanh(double v) { return std::tanh(v); }
double f_cosh(double v) { return std::cosh(v); }
double f_sinh(double v) { return std::sinh(v); }

struct Builtin {
  const char* name;
  double (*fn)(double);
};

constexpr Builtin kBuiltins[] = {{"sin", f_sin},   {"cos", f_cos},   {"tan", f_tan},   {"exp", f_exp},
                                 {"log", f_log},   {"sqrt", f_sqrt}, {"abs", f_abs},   {"tanh", f_tanh},
                                 {"cosh", f_cosh}, {"sinh", f_sinh}};

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != s_.size()) error("unexpected character");
    return n;
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    std::ostringstream msg;
    msg << what << " at position " << pos_ << " in expression '" << s_ << "'";
    fail(ErrorKind::ParseError, msg.str());
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (accept('+')) n = make(Op::Add, n, term());
      else if (accept('-')) n = make(Op::Sub, n, term());
      else return n;
    }
  }

  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*')) n = make(Op::Mul, n, unary());
      else if (accept('/')) n = make(Op::Div, n, unary());
      else return n;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Op::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) error("unexpected end");
    if (accept('(')) {
      NodePtr n = expr();
      if (!accept(')')) error("missing ')'");
      return n;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) error("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return make_const(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (name == "x") return make(Op::Var);
      if (name == "pi") return make_const(std::numbers::pi);
      for (const auto& b : kBuiltins) {
        if (name == b.name) {
          if (!accept('(')) error("expected '(' after " + name);
          auto n = std::make_shared<Expression::Node>();
          n->op = Op::Call;
          n->fn = b.fn;
          n->lhs = expr();
          if (!accept(')')) error("missing ')'");
          return n;
        }
      }
      pos_ = start;
      error("unknown identifier '" + name + "'");
    }
    error("unexpected character");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression() : root_(make_const(0.0)), text_("0") {}

Expression Expression::parse(const std::string& text) {
  Expression e;
  e.root_ = Parser(text).parse();
  e.text_ = text;
  return e;
}

Expression Expression::constant(double c) {
  Expression e;
  e.root_ = make_const(c);
  std::ostringstream os;
  os.precision(17);
  os << c;
  e.text_ = os.str();
  return e;
}

double Expression::operator()(double x) const { return root_->eval(x); }

bool Expression::depends_on_x() const { return root_->uses_var(); }

}  // namespace xtend
