#include <doctest.h>

#include <cmath>
#include <numbers>

#include "atwflow/error.hpp"
#include "atwflow/expression.hpp"

using namespace atwflow;

TEST_CASE("expression evaluation and derivatives") {
  Expression e = Expression::parse("1 + 0.5*sin(2*pi*t) - x*y + exp(-x)");
  const double x = 0.3, y = 0.7, t = 0.1;
  CHECK(e(x, y, t) == doctest::Approx(1 + 0.5 * std::sin(2 * std::numbers::pi * t) - x * y + std::exp(-x)));
  CHECK(e.derivative(Expression::Variable::X)(x, y, t) == doctest::Approx(-y - std::exp(-x)));
  CHECK(e.derivative(Expression::Variable::T)(x, y, t) ==
        doctest::Approx(std::numbers::pi * std::cos(2 * std::numbers::pi * t)));
  CHECK_FALSE(e.independent_of(Expression::Variable::T));
  CHECK(Expression::parse("2*(3 + 1)").is_constant());
  CHECK(Expression::parse("cos(y)").independent_of(Expression::Variable::X));
  CHECK((-Expression::parse("x"))(2.0, 0.0) == doctest::Approx(-2.0));
}

TEST_CASE("expression syntax errors") {
  CHECK_THROWS_AS(Expression::parse("1 +"), InputError);
  CHECK_THROWS_AS(Expression::parse("foo(x)"), InputError);
  CHECK_THROWS_AS(Expression::parse("(x"), InputError);
}
