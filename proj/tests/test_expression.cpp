#include <gtest/gtest.h>

#include <cmath>

#include "ousym/dual.hpp"
#include "ousym/expression.hpp"
#include "ousym/model.hpp"

using namespace ousym;

namespace {

double eval(const std::string& text, const VectorXd& x) {
  return expr::parse(text, expr::VariableSet::indexed("x", static_cast<int>(x.size()))).evaluate<double>(x);
}

}  // namespace

TEST(Expression, Precedence) {
  const VectorXd x = VectorXd::Constant(1, 2.0);
  EXPECT_DOUBLE_EQ(eval("1 + 2*3", x), 7.0);
  EXPECT_DOUBLE_EQ(eval("2^3^2", x), 512.0);
  EXPECT_DOUBLE_EQ(eval("-2^2", x), -4.0);
  EXPECT_DOUBLE_EQ(eval("2^-1", x), 0.5);
  EXPECT_DOUBLE_EQ(eval("8/2/2", x), 2.0);
  EXPECT_DOUBLE_EQ(eval("1 - 2 - 3", x), -4.0);
  EXPECT_DOUBLE_EQ(eval("(1 + 2)*x1", x), 6.0);
  EXPECT_DOUBLE_EQ(eval("  x1*x1   ", x), 4.0);
  EXPECT_DOUBLE_EQ(eval("1.5e1", x), 15.0);
}

TEST(Expression, Functions) {
  VectorXd x(2);
  x << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(eval("norm(x)", x), 5.0);
  EXPECT_DOUBLE_EQ(eval("sqrt(x1^2 + x2^2)", x), 5.0);
  EXPECT_DOUBLE_EQ(eval("abs(-x2)", x), 4.0);
  EXPECT_NEAR(eval("sin(x1)^2 + cos(x1)^2", x), 1.0, 1e-15);
  EXPECT_NEAR(eval("log(exp(x2))", x), 4.0, 1e-15);
}

TEST(Expression, RenderRoundTrip) {
  const auto vars = expr::VariableSet::indexed("x", 3);
  for (const char* text : {"4*x1 + 3", "2^3^x2", "(2^3)^x2", "-(x1 - x2) - x3", "x1/(x2*x3)", "x1 - (x2 - x3)",
                           "sin(cos(x1))*exp(-x2)", "(1 + norm(x)^2)*x1", "-x1^2", "(-x1)^2", "1e-300*x1",
                           "0.1 + 0.2", "abs(x1)/sqrt(x2^2 + 1)", "x1/x2/x3", "x1/(x2/x3)"}) {
    const expr::Expression e = expr::parse(text, vars);
    const expr::Expression again = expr::parse(e.render(), vars);
    EXPECT_TRUE(e == again) << text << " -> " << e.render();
    EXPECT_EQ(e.render(), again.render());
  }
}

TEST(Expression, SyntaxErrorOffset) {
  try {
    parse_force_expression("4*x1 +", 1);
    FAIL() << "expected SyntaxError";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.offset(), 7u);
    EXPECT_EQ(e.kind(), ErrorKind::SyntaxError);
  }
  try {
    parse_force_expression("x1 * (2 + ", 1);
    FAIL();
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.offset(), 11u);
  }
  try {
    parse_force_expression("x1 $ 2", 1);
    FAIL();
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(Expression, UnknownIdentifierAndArity) {
  try {
    parse_force_expression("x2", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownIdentifier);
  }
  try {
    parse_force_expression("x1; x2", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ArityMismatch);
  }
  try {
    parse_force_expression("x1", 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ArityMismatch);
  }
}

TEST(Expression, DomainErrors) {
  const VectorXd x = VectorXd::Constant(1, -1.0);
  for (const char* text : {"log(x1)", "sqrt(x1)", "log(x1 + 1)"}) {
    try {
      eval(text, x);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::DomainError) << text;
    }
  }
}

TEST(Expression, DualEvaluationMatchesDerivative) {
  const auto vars = expr::VariableSet::indexed("x", 2);
  const expr::Expression e = expr::parse("x1^3*sin(x2) + exp(x1*x2) + norm(x)", vars);
  VecX<D1> p(2);
  p[0] = D1(0.7, 1.0);
  p[1] = D1(-0.4, 0.0);
  const D1 r = e.evaluate<D1>(p);
  const double x1 = 0.7, x2 = -0.4;
  const double expect = 3 * x1 * x1 * std::sin(x2) + x2 * std::exp(x1 * x2) + x1 / std::hypot(x1, x2);
  EXPECT_NEAR(r.d, expect, 1e-14);
}

TEST(Expression, ParsedLinearMatchesLinearVariant) {
  const ForceField parsed = parse_force_expression("4*x1 + 3", 1);
  const ForceField lin = ForceField::linear(MatrixXd::Constant(1, 1, 4.0), VectorXd::Constant(1, 3.0));
  for (const auto& p : default_force_probes(1, 50, 3)) {
    EXPECT_DOUBLE_EQ(parsed.evaluate<double>(p)[0], lin.evaluate<double>(p)[0]);
  }
}
