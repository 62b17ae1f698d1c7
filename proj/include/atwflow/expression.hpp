#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace atwflow {

namespace detail {
struct ExprNode;
}

/// Immutable scalar expression in the variables x, y, t.
///
/// Grammar (whitespace ignored):
///   expr   := term (('+' | '-') term)*
///   term   := unary ('*' unary)*
///   unary  := '-' unary | atom
///   atom   := number | 'x' | 'y' | 't' | 'pi'
///           | ('sin' | 'cos' | 'exp') '(' expr ')' | '(' expr ')'
///
/// Expressions are differentiated symbolically so that models built on top
/// of them have exact derivatives.
class Expression {
 public:
  enum class Variable { X, Y, T };

  /// The constant expression `value`.
  explicit Expression(double value = 0.0);

  /// Parses `text`; throws InputError with the offending column on failure.
  static Expression parse(std::string_view text);

  double operator()(double x, double y, double t = 0.0) const;
  Expression derivative(Variable v) const;
  Expression operator-() const;

  /// True if the expression does not depend on `v`.
  bool independent_of(Variable v) const;
  bool is_constant() const;

  std::string to_string() const;

 private:
  explicit Expression(std::shared_ptr<const detail::ExprNode> node);
  std::shared_ptr<const detail::ExprNode> node_;
};

}  // namespace atwflow
