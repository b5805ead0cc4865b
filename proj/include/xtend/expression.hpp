#pragma once

#include <memory>
#include <string>

namespace xtend {

/// Real-valued expression in one variable `x`.
///
/// Grammar: numbers, x, pi, + - * / ^, parentheses and the functions
/// sin cos tan exp log sqrt abs tanh cosh sinh. `^` is right-associative.
class Expression {
 public:
  struct Node;

  Expression();  // constant 0
  static Expression parse(const std::string& text);
  static Expression constant(double c);

  double operator()(double x) const;
  bool depends_on_x() const;
  const std::string& text() const { return text_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace xtend
