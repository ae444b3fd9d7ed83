#include "ousym/expression.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace ousym {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonPositiveFriction: return "NonPositiveFriction";
    case ErrorKind::ZeroNoise: return "ZeroNoise";
    case ErrorKind::EmptyProbeSet: return "EmptyProbeSet";
    case ErrorKind::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorKind::NonFiniteResult: return "NonFiniteResult";
    case ErrorKind::NotAnInvariant: return "NotAnInvariant";
    case ErrorKind::UnclassifiableForce: return "UnclassifiableForce";
    case ErrorKind::NotDiagonalizable: return "NotDiagonalizable";
    case ErrorKind::WrongForceClass: return "WrongForceClass";
    case ErrorKind::InvalidGrid: return "InvalidGrid";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::DomainExit: return "DomainExit";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorKind::ArityMismatch: return "ArityMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DerivativeOrderExhausted: return "DerivativeOrderExhausted";
  }
  return "Unknown";
}

}  // namespace ousym

namespace ousym::expr {

namespace detail {
void domain_error(const char* what, double arg) {
  throw Error(ErrorKind::DomainError,
              std::string(what) + " evaluated outside its domain at " + format_double(arg));
}
}  // namespace detail

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

VariableSet VariableSet::indexed(std::string_view prefix, int n) {
  VariableSet vs;
  vs.add_indexed(prefix, n, 0);
  return vs;
}

void VariableSet::add_indexed(std::string_view prefix, int n, int offset) {
  std::vector<int> members;
  for (int i = 0; i < n; ++i) {
    add(std::string(prefix) + std::to_string(i + 1), offset + i);
    members.push_back(offset + i);
  }
  groups[std::string(prefix)] = members;
}

void VariableSet::add(std::string_view name, int index) {
  names[std::string(name)] = index;
  size = std::max(size, index + 1);
}

namespace {

NodePtr make(Node n) { return std::make_shared<const Node>(std::move(n)); }

NodePtr make_unary(Op op, NodePtr a) {
  Node n;
  n.op = op;
  n.constant = a->constant;
  n.lhs = std::move(a);
  return make(std::move(n));
}

NodePtr make_binary(Op op, NodePtr a, NodePtr b) {
  Node n;
  n.op = op;
  n.constant = a->constant && b->constant;
  n.lhs = std::move(a);
  n.rhs = std::move(b);
  return make(std::move(n));
}

const std::map<std::string, Op, std::less<>>& functions() {
  static const std::map<std::string, Op, std::less<>> table = {
      {"sin", Op::Sin}, {"cos", Op::Cos},   {"exp", Op::Exp},
      {"log", Op::Log}, {"sqrt", Op::Sqrt}, {"abs", Op::Abs},
  };
  return table;
}

class Parser {
 public:
  Parser(std::string_view text, const VariableSet& vars) : text_(text), vars_(vars) {}

  NodePtr parse_all() {
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(pos_ + 1, what); }

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

  void expect(char c) {
    if (!accept(c)) {
      skip_ws();
      fail(std::string("expected '") + c + "'");
    }
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make_binary(Op::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = make_binary(Op::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_binary(Op::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make_binary(Op::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_unary(Op::Neg, parse_unary());
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (accept('^')) return make_binary(Op::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    if (accept('(')) {
      NodePtr e = parse_expr();
      expect(')');
      return e;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double value = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    Node n;
    n.op = Op::Literal;
    n.value = value;
    return make(std::move(n));
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view id = text_.substr(start, pos_ - start);

    if (id == "norm") {
      expect('(');
      skip_ws();
      const std::size_t gstart = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      const std::string_view gname = text_.substr(gstart, pos_ - gstart);
      auto g = vars_.groups.find(gname);
      if (g == vars_.groups.end()) {
        throw Error(ErrorKind::UnknownIdentifier,
                    "unknown variable group '" + std::string(gname) + "' at offset " +
                        std::to_string(gstart + 1));
      }
      expect(')');
      Node n;
      n.op = Op::Norm;
      n.name = std::string(gname);
      n.group = g->second;
      n.constant = n.group.empty();
      return make(std::move(n));
    }

    if (auto f = functions().find(id); f != functions().end()) {
      expect('(');
      NodePtr arg = parse_expr();
      expect(')');
      return make_unary(f->second, arg);
    }

    if (auto v = vars_.names.find(id); v != vars_.names.end()) {
      Node n;
      n.op = Op::Variable;
      n.var = v->second;
      n.name = std::string(id);
      n.constant = false;
      return make(std::move(n));
    }

    throw Error(ErrorKind::UnknownIdentifier,
                "unknown identifier '" + std::string(id) + "' at offset " + std::to_string(start + 1));
  }

  std::string_view text_;
  const VariableSet& vars_;
  std::size_t pos_ = 0;
};

int precedence(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

const char* symbol(Op op) {
  switch (op) {
    case Op::Add: return " + ";
    case Op::Sub: return " - ";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Pow: return "^";
    default: return "?";
  }
}

const char* function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Abs: return "abs";
    default: return "?";
  }
}

void render(const Node& n, std::ostringstream& os);

void render_child(const Node& child, bool parens, std::ostringstream& os) {
  if (parens) os << '(';
  render(child, os);
  if (parens) os << ')';
}

void render(const Node& n, std::ostringstream& os) {
  const int p = precedence(n.op);
  switch (n.op) {
    case Op::Literal:
      os << format_double(n.value);
      return;
    case Op::Variable:
      os << n.name;
      return;
    case Op::Norm:
      os << "norm(" << n.name << ')';
      return;
    case Op::Neg:
      os << '-';
      render_child(*n.lhs, precedence(n.lhs->op) < 3, os);
      return;
    case Op::Pow:
      render_child(*n.lhs, precedence(n.lhs->op) <= 4, os);
      os << '^';
      render_child(*n.rhs, precedence(n.rhs->op) < 3, os);
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
      render_child(*n.lhs, precedence(n.lhs->op) < p, os);
      os << symbol(n.op);
      render_child(*n.rhs, precedence(n.rhs->op) <= p, os);
      return;
    default:
      os << function_name(n.op) << '(';
      render(*n.lhs, os);
      os << ')';
      return;
  }
}

bool equal(const Node* a, const Node* b) {
  if (a == b) return true;
  if (a == nullptr || b == nullptr) return false;
  if (a->op != b->op) return false;
  switch (a->op) {
    case Op::Literal: return a->value == b->value;
    case Op::Variable: return a->var == b->var && a->name == b->name;
    case Op::Norm: return a->group == b->group && a->name == b->name;
    default: return equal(a->lhs.get(), b->lhs.get()) && equal(a->rhs.get(), b->rhs.get());
  }
}

}  // namespace

Expression Expression::literal(double v) {
  Node n;
  n.op = Op::Literal;
  n.value = v;
  return Expression(make(std::move(n)));
}

Expression Expression::variable(std::string name, int index) {
  Node n;
  n.op = Op::Variable;
  n.var = index;
  n.name = std::move(name);
  n.constant = false;
  return Expression(make(std::move(n)));
}

Expression Expression::unary(Op op, const Expression& a) { return Expression(make_unary(op, a.root_)); }

Expression Expression::binary(Op op, const Expression& a, const Expression& b) {
  return Expression(make_binary(op, a.root_, b.root_));
}

std::string Expression::render() const {
  if (!root_) return "";
  std::ostringstream os;
  expr::render(*root_, os);
  return os.str();
}

bool operator==(const Expression& a, const Expression& b) { return equal(a.root_.get(), b.root_.get()); }

Expression parse(std::string_view text, const VariableSet& vars) {
  return Expression(Parser(text, vars).parse_all());
}

std::vector<Expression> parse_components(std::string_view text, const VariableSet& vars, int count) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t semi = text.find(';', start);
    parts.push_back(text.substr(start, semi == std::string_view::npos ? std::string_view::npos
                                                                      : semi - start));
    if (semi == std::string_view::npos) break;
    start = semi + 1;
  }
  if (static_cast<int>(parts.size()) != count) {
    throw Error(ErrorKind::ArityMismatch, "expected " + std::to_string(count) +
                                              " components, got " + std::to_string(parts.size()));
  }
  std::vector<Expression> out;
  std::size_t offset = 0;
  for (auto part : parts) {
    try {
      out.push_back(parse(part, vars));
    } catch (const SyntaxError& e) {
      throw SyntaxError(offset + e.offset(), "component " + std::to_string(out.size() + 1) + ": " +
                                                 std::string(e.what()));
    }
    offset += part.size() + 1;
  }
  return out;
}

}  // namespace ousym::expr
