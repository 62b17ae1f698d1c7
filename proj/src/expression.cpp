#include "atwflow/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "atwflow/error.hpp"

namespace atwflow {

namespace detail {

enum class Op { Const, VarX, VarY, VarT, Add, Sub, Mul, Neg, Sin, Cos, Exp };

struct ExprNode {
  Op op;
  double value = 0.0;
  std::shared_ptr<const ExprNode> lhs;
  std::shared_ptr<const ExprNode> rhs;
};

}  // namespace detail

namespace {

using detail::ExprNode;
using detail::Op;
using NodePtr = std::shared_ptr<const ExprNode>;

NodePtr make_const(double v) { return std::make_shared<ExprNode>(ExprNode{Op::Const, v, nullptr, nullptr}); }
NodePtr make_var(Op op) { return std::make_shared<ExprNode>(ExprNode{op, 0.0, nullptr, nullptr}); }

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

NodePtr make_unary(Op op, NodePtr a) {
  if (a->op == Op::Const) {
    switch (op) {
      case Op::Neg: return make_const(-a->value);
      case Op::Sin: return make_const(std::sin(a->value));
      case Op::Cos: return make_const(std::cos(a->value));
      case Op::Exp: return make_const(std::exp(a->value));
      default: break;
    }
  }
  return std::make_shared<ExprNode>(ExprNode{op, 0.0, std::move(a), nullptr});
}

NodePtr make_binary(Op op, NodePtr a, NodePtr b) {
  // Fold the trivial cases produced by symbolic differentiation.
  if (a->op == Op::Const && b->op == Op::Const) {
    switch (op) {
      case Op::Add: return make_const(a->value + b->value);
      case Op::Sub: return make_const(a->value - b->value);
      case Op::Mul: return make_const(a->value * b->value);
      default: break;
    }
  }
  if (op == Op::Add) {
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
  } else if (op == Op::Sub) {
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return make_unary(Op::Neg, b);
  } else if (op == Op::Mul) {
    if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
  }
  return std::make_shared<ExprNode>(ExprNode{op, 0.0, std::move(a), std::move(b)});
}

double eval(const ExprNode& n, double x, double y, double t) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::VarX: return x;
    case Op::VarY: return y;
    case Op::VarT: return t;
    case Op::Add: return eval(*n.lhs, x, y, t) + eval(*n.rhs, x, y, t);
    case Op::Sub: return eval(*n.lhs, x, y, t) - eval(*n.rhs, x, y, t);
    case Op::Mul: return eval(*n.lhs, x, y, t) * eval(*n.rhs, x, y, t);
    case Op::Neg: return -eval(*n.lhs, x, y, t);
    case Op::Sin: return std::sin(eval(*n.lhs, x, y, t));
    case Op::Cos: return std::cos(eval(*n.lhs, x, y, t));
    case Op::Exp: return std::exp(eval(*n.lhs, x, y, t));
  }
  return 0.0;
}

NodePtr differentiate(const NodePtr& n, Op var) {
  switch (n->op) {
    case Op::Const: return make_const(0.0);
    case Op::VarX:
    case Op::VarY:
    case Op::VarT: return make_const(n->op == var ? 1.0 : 0.0);
    case Op::Add: return make_binary(Op::Add, differentiate(n->lhs, var), differentiate(n->rhs, var));
    case Op::Sub: return make_binary(Op::Sub, differentiate(n->lhs, var), differentiate(n->rhs, var));
    case Op::Mul:
      return make_binary(Op::Add, make_binary(Op::Mul, differentiate(n->lhs, var), n->rhs),
                         make_binary(Op::Mul, n->lhs, differentiate(n->rhs, var)));
    case Op::Neg: return make_unary(Op::Neg, differentiate(n->lhs, var));
    case Op::Sin:
      return make_binary(Op::Mul, make_unary(Op::Cos, n->lhs), differentiate(n->lhs, var));
    case Op::Cos:
      return make_unary(Op::Neg,
                        make_binary(Op::Mul, make_unary(Op::Sin, n->lhs), differentiate(n->lhs, var)));
    case Op::Exp: return make_binary(Op::Mul, n, differentiate(n->lhs, var));
  }
  return make_const(0.0);
}

bool depends_on(const ExprNode& n, Op var) {
  if (n.op == var) return true;
  if (n.lhs && depends_on(*n.lhs, var)) return true;
  if (n.rhs && depends_on(*n.rhs, var)) return true;
  return false;
}

void print(const ExprNode& n, std::ostream& os) {
  switch (n.op) {
    case Op::Const: {
      std::ostringstream tmp;
      tmp.precision(17);
      tmp << n.value;
      os << (n.value < 0 ? "(" + tmp.str() + ")" : tmp.str());
      return;
    }
    case Op::VarX: os << 'x'; return;
    case Op::VarY: os << 'y'; return;
    case Op::VarT: os << 't'; return;
    case Op::Add: os << '('; print(*n.lhs, os); os << " + "; print(*n.rhs, os); os << ')'; return;
    case Op::Sub: os << '('; print(*n.lhs, os); os << " - "; print(*n.rhs, os); os << ')'; return;
    case Op::Mul: print(*n.lhs, os); os << '*'; print(*n.rhs, os); return;
    case Op::Neg: os << "(-"; print(*n.lhs, os); os << ')'; return;
    case Op::Sin: os << "sin("; print(*n.lhs, os); os << ')'; return;
    case Op::Cos: os << "cos("; print(*n.lhs, os); os << ')'; return;
    case Op::Exp: os << "exp("; print(*n.lhs, os); os << ')'; return;
  }
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("expression '" + std::string(text_) + "': " + msg + " at column " +
                     std::to_string(pos_ + 1));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) lhs = make_binary(Op::Add, lhs, term());
      else if (accept('-')) lhs = make_binary(Op::Sub, lhs, term());
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (accept('*')) lhs = make_binary(Op::Mul, lhs, unary());
    return lhs;
  }

  NodePtr unary() {
    if (accept('-')) return make_unary(Op::Neg, unary());
    return atom();
  }

  NodePtr atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
      if (ec != std::errc()) fail("bad number");
      pos_ = static_cast<std::size_t>(ptr - text_.data());
      return make_const(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      std::string_view word = text_.substr(start, pos_ - start);
      if (word == "x") return make_var(Op::VarX);
      if (word == "y") return make_var(Op::VarY);
      if (word == "t") return make_var(Op::VarT);
      if (word == "pi") return make_const(std::numbers::pi);
      Op fn;
      if (word == "sin") fn = Op::Sin;
      else if (word == "cos") fn = Op::Cos;
      else if (word == "exp") fn = Op::Exp;
      else {
        pos_ = start;
        fail("unknown identifier '" + std::string(word) + "'");
      }
      if (!accept('(')) fail("expected '(' after function name");
      NodePtr arg = expr();
      if (!accept(')')) fail("expected ')'");
      return make_unary(fn, arg);
    }
    fail("unexpected character");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

Op to_op(Expression::Variable v) {
  switch (v) {
    case Expression::Variable::X: return Op::VarX;
    case Expression::Variable::Y: return Op::VarY;
    case Expression::Variable::T: return Op::VarT;
  }
  return Op::VarX;
}

}  // namespace

Expression::Expression(double value) : node_(make_const(value)) {}

Expression::Expression(std::shared_ptr<const detail::ExprNode> node) : node_(std::move(node)) {}

Expression Expression::parse(std::string_view text) { return Expression(Parser(text).parse()); }

double Expression::operator()(double x, double y, double t) const { return eval(*node_, x, y, t); }

Expression Expression::derivative(Variable v) const { return Expression(differentiate(node_, to_op(v))); }

Expression Expression::operator-() const { return Expression(make_unary(Op::Neg, node_)); }

bool Expression::independent_of(Variable v) const { return !depends_on(*node_, to_op(v)); }

bool Expression::is_constant() const { return node_->op == Op::Const; }

std::string Expression::to_string() const {
  std::ostringstream os;
  print(*node_, os);
  return os.str();
}

}  // namespace atwflow
