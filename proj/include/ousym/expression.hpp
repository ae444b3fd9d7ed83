#pragma once

// Small arithmetic expression language used for user supplied force fields,
// scaling functions of the invariants, and generic generator coefficients.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          (right associative)
//   primary := number | variable | func '(' expr ')' | 'norm' '(' group ')'
//            | '(' expr ')'
//   func    := sin | cos | exp | log | sqrt | abs
//
// Whitespace is insignificant. Variables and groups come from a VariableSet.

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ousym/errors.hpp"
#include "ousym/types.hpp"

namespace ousym::expr {

enum class Op { Literal, Variable, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Log, Sqrt, Abs, Norm };

struct Node {
  Op op = Op::Literal;
  double value = 0.0;       // Literal
  int var = -1;             // Variable
  std::string name;         // Variable / Norm group name
  std::vector<int> group;   // Norm members
  std::shared_ptr<const Node> lhs, rhs;  // operands (unary ops use lhs)
  bool constant = true;     // subtree free of variables
};

using NodePtr = std::shared_ptr<const Node>;

/// Names the parser accepts as variables. Each maps to an index into the
/// evaluation vector; groups (for norm(...)) map to several indices.
struct VariableSet {
  std::map<std::string, int, std::less<>> names;
  std::map<std::string, std::vector<int>, std::less<>> groups;
  int size = 0;

  /// prefix1..prefixn at indices offset..offset+n-1, plus group `prefix`.
  static VariableSet indexed(std::string_view prefix, int n);
  void add_indexed(std::string_view prefix, int n, int offset);
  void add(std::string_view name, int index);
};

class Expression {
 public:
  Expression() = default;
  explicit Expression(NodePtr root) : root_(std::move(root)) {}

  static Expression literal(double v);
  static Expression variable(std::string name, int index);
  static Expression unary(Op op, const Expression& a);
  static Expression binary(Op op, const Expression& a, const Expression& b);

  const NodePtr& root() const { return root_; }
  bool empty() const { return root_ == nullptr; }
  bool is_constant() const { return root_ == nullptr || root_->constant; }

  template <class S>
  S evaluate(const VecX<S>& vars) const {
    return eval(*root_, vars);
  }

  std::string render() const;

  friend bool operator==(const Expression& a, const Expression& b);

 private:
  template <class S>
  static S eval(const Node& n, const VecX<S>& vars);

  NodePtr root_;
};

Expression parse(std::string_view text, const VariableSet& vars);

/// Semicolon separated components; throws ArityMismatch unless exactly `count`.
std::vector<Expression> parse_components(std::string_view text, const VariableSet& vars,
                                         int count);

std::string format_double(double v);

namespace detail {
[[noreturn]] void domain_error(const char* what, double arg);
}

template <class S>
S Expression::eval(const Node& n, const VecX<S>& vars) {
  using std::abs;
  using std::cos;
  using std::exp;
  using std::log;
  using std::pow;
  using std::sin;
  using std::sqrt;
  switch (n.op) {
    case Op::Literal:
      return S(n.value);
    case Op::Variable:
      return vars[n.var];
    case Op::Add:
      return eval(*n.lhs, vars) + eval(*n.rhs, vars);
    case Op::Sub:
      return eval(*n.lhs, vars) - eval(*n.rhs, vars);
    case Op::Mul:
      return eval(*n.lhs, vars) * eval(*n.rhs, vars);
    case Op::Div:
      return eval(*n.lhs, vars) / eval(*n.rhs, vars);
    case Op::Neg:
      return -eval(*n.lhs, vars);
    case Op::Pow: {
      const S base = eval(*n.lhs, vars);
      if (n.rhs->constant) {
        const double p = eval(*n.rhs, VecX<double>{});
        if (primal(base) < 0.0 && p != std::floor(p)) detail::domain_error("pow", primal(base));
        if constexpr (std::is_same_v<S, double>) {
          return std::pow(base, p);
        } else {
          return pow(base, p);
        }
      }
      if (!(primal(base) > 0.0)) detail::domain_error("pow", primal(base));
      return exp(eval(*n.rhs, vars) * log(base));
    }
    case Op::Sin:
      return sin(eval(*n.lhs, vars));
    case Op::Cos:
      return cos(eval(*n.lhs, vars));
    case Op::Exp:
      return exp(eval(*n.lhs, vars));
    case Op::Log: {
      const S a = eval(*n.lhs, vars);
      if (!(primal(a) > 0.0)) detail::domain_error("log", primal(a));
      return log(a);
    }
    case Op::Sqrt: {
      const S a = eval(*n.lhs, vars);
      if (primal(a) < 0.0) detail::domain_error("sqrt", primal(a));
      return sqrt(a);
    }
    case Op::Abs:
      return abs(eval(*n.lhs, vars));
    case Op::Norm: {
      S acc(0.0);
      for (int idx : n.group) acc = acc + vars[idx] * vars[idx];
      return sqrt(acc);
    }
  }
  return S(0.0);
}

}  // namespace ousym::expr
