#include "algebroid/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace algebroid {

ParseError::ParseError(std::string msg, std::size_t offset)
    : std::runtime_error(msg + " (at byte " + std::to_string(offset) + ")"),
      offset_(offset) {}

EvalError::EvalError(std::string msg, std::string where, long offset)
    : std::runtime_error(offset >= 0
                             ? msg + " in `" + where + "` (at byte " + std::to_string(offset) + ")"
                             : msg + " in `" + where + "`"),
      where_(std::move(where)),
      offset_(offset) {}

namespace {

using Node = Expr::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make_node(Node n) { return std::make_shared<const Node>(std::move(n)); }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Trim to the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char out[32];
    std::snprintf(out, sizeof out, "%.*g", prec, v);
    if (std::strtod(out, nullptr) == v) return out;
  }
  return buf;
}

const char* unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "-";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Tan: return "tan";
    case UnaryOp::Sinh: return "sinh";
    case UnaryOp::Cosh: return "cosh";
    case UnaryOp::Tanh: return "tanh";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Log: return "log";
    case UnaryOp::Sqrt: return "sqrt";
  }
  return "?";
}

// Printing precedence: additive 1, multiplicative 2, unary minus 3, power 4.
int precedence(const Node& n) {
  switch (n.kind) {
    case Node::Kind::Constant: return n.value < 0 ? 3 : 5;
    case Node::Kind::Variable: return 5;
    case Node::Kind::Unary: return n.uop == UnaryOp::Neg ? 3 : 5;
    case Node::Kind::Binary:
      switch (n.bop) {
        case BinaryOp::Add:
        case BinaryOp::Sub: return 1;
        case BinaryOp::Mul:
        case BinaryOp::Div: return 2;
        case BinaryOp::Pow: return 4;
      }
  }
  return 5;
}

void print_node(const Node& n, std::ostringstream& out, int parent_prec) {
  const int prec = precedence(n);
  const bool parens = prec < parent_prec;
  if (parens) out << '(';
  switch (n.kind) {
    case Node::Kind::Constant:
      out << format_double(n.value);
      break;
    case Node::Kind::Variable:
      out << n.name;
      break;
    case Node::Kind::Unary:
      if (n.uop == UnaryOp::Neg) {
        out << '-';
        print_node(*n.a, out, prec + 1);
      } else {
        out << unary_name(n.uop) << '(';
        print_node(*n.a, out, 0);
        out << ')';
      }
      break;
    case Node::Kind::Binary: {
      const char* sym = "";
      int lp = prec, rp = prec + 1;
      switch (n.bop) {
        case BinaryOp::Add: sym = " + "; break;
        case BinaryOp::Sub: sym = " - "; break;
        case BinaryOp::Mul: sym = "*"; break;
        case BinaryOp::Div: sym = "/"; break;
        case BinaryOp::Pow:
          sym = "^";
          lp = prec + 1;  // right-associative
          rp = prec;
          break;
      }
      print_node(*n.a, out, lp);
      out << sym;
      print_node(*n.b, out, rp);
      break;
    }
  }
  if (parens) out << ')';
}

std::string node_str(const Node& n) {
  std::ostringstream out;
  print_node(n, out, 0);
  return out.str();
}

[[noreturn]] void eval_fail(const Node& n, const std::string& msg) {
  throw EvalError(msg, node_str(n), n.offset);
}

double eval_node(const Node& n, const Binding& binding) {
  switch (n.kind) {
    case Node::Kind::Constant:
      return n.value;
    case Node::Kind::Variable: {
      auto it = binding.find(n.name);
      if (it == binding.end()) eval_fail(n, "unbound variable '" + n.name + "'");
      return it->second;
    }
    case Node::Kind::Unary: {
      const double x = eval_node(*n.a, binding);
      switch (n.uop) {
        case UnaryOp::Neg: return -x;
        case UnaryOp::Sin: return std::sin(x);
        case UnaryOp::Cos: return std::cos(x);
        case UnaryOp::Tan: return std::tan(x);
        case UnaryOp::Sinh: return std::sinh(x);
        case UnaryOp::Cosh: return std::cosh(x);
        case UnaryOp::Tanh: return std::tanh(x);
        case UnaryOp::Exp: return std::exp(x);
        case UnaryOp::Log:
          if (x <= 0.0) eval_fail(n, "log of non-positive value");
          return std::log(x);
        case UnaryOp::Sqrt:
          if (x < 0.0) eval_fail(n, "sqrt of negative value");
          return std::sqrt(x);
      }
      break;
    }
    case Node::Kind::Binary: {
      const double x = eval_node(*n.a, binding);
      const double y = eval_node(*n.b, binding);
      switch (n.bop) {
        case BinaryOp::Add: return x + y;
        case BinaryOp::Sub: return x - y;
        case BinaryOp::Mul: return x * y;
        case BinaryOp::Div:
          if (y == 0.0) eval_fail(n, "division by zero");
          return x / y;
        case BinaryOp::Pow: {
          const double r = std::pow(x, y);
          if (!std::isfinite(r)) eval_fail(n, "pow out of domain");
          return r;
        }
      }
      break;
    }
  }
  eval_fail(n, "corrupt expression node");
}

}  // namespace

Expr::Expr() : node_(make_node(Node(Node::Kind::Constant))) {}

Expr Expr::constant(double value) {
  Node n(Node::Kind::Constant);
  n.value = value;
  return Expr(make_node(std::move(n)));
}

Expr Expr::variable(std::string name) {
  Node n(Node::Kind::Variable);
  n.name = std::move(name);
  return Expr(make_node(std::move(n)));
}

Expr Expr::wrap(std::shared_ptr<const Node> n) { return Expr(std::move(n)); }

double Expr::eval(const Binding& binding) const { return eval_node(*node_, binding); }

std::string Expr::str() const { return node_str(*node_); }

bool Expr::is_constant() const { return node_->kind == Node::Kind::Constant; }

bool Expr::is_zero() const { return is_constant() && node_->value == 0.0; }

double Expr::constant_value() const { return node_->value; }

void Expr::collect_variables(std::set<std::string>& out) const {
  switch (node_->kind) {
    case Node::Kind::Variable: out.insert(node_->name); break;
    case Node::Kind::Unary: Expr(node_->a).collect_variables(out); break;
    case Node::Kind::Binary:
      Expr(node_->a).collect_variables(out);
      Expr(node_->b).collect_variables(out);
      break;
    default: break;
  }
}

std::set<std::string> Expr::variables() const {
  std::set<std::string> out;
  collect_variables(out);
  return out;
}

Expr make_unary(UnaryOp op, Expr a, long offset) {
  if (a.is_constant()) {
    Binding empty;
    Node probe(Node::Kind::Unary);
    probe.uop = op;
    probe.a = a.node_;
    probe.offset = offset;
    // Fold only when the value is defined; otherwise keep the node so the
    // error surfaces at evaluation time with a location.
    try {
      const double v = eval_node(probe, empty);
      return Expr::constant(v);
    } catch (const EvalError&) {
      return Expr(make_node(std::move(probe)));
    }
  }
  if (op == UnaryOp::Neg && a.node_->kind == Node::Kind::Unary &&
      a.node_->uop == UnaryOp::Neg)
    return Expr(a.node_->a);
  Node n(Node::Kind::Unary);
  n.uop = op;
  n.a = a.node_;
  n.offset = offset;
  return Expr(make_node(std::move(n)));
}

Expr make_binary(BinaryOp op, Expr a, Expr b, long offset) {
  if (a.is_constant() && b.is_constant()) {
    Node probe(Node::Kind::Binary);
    probe.bop = op;
    probe.a = a.node_;
    probe.b = b.node_;
    probe.offset = offset;
    try {
      Binding empty;
      return Expr::constant(eval_node(probe, empty));
    } catch (const EvalError&) {
      return Expr(make_node(std::move(probe)));
    }
  }
  switch (op) {
    case BinaryOp::Add:
      if (a.is_zero()) return b;
      if (b.is_zero()) return a;
      break;
    case BinaryOp::Sub:
      if (b.is_zero()) return a;
      if (a.is_zero()) return make_unary(UnaryOp::Neg, b, offset);
      break;
    case BinaryOp::Mul:
      if (a.is_zero() || b.is_zero()) return Expr::constant(0.0);
      if (a.is_constant() && a.constant_value() == 1.0) return b;
      if (b.is_constant() && b.constant_value() == 1.0) return a;
      if (a.is_constant() && a.constant_value() == -1.0) return -b;
      if (b.is_constant() && b.constant_value() == -1.0) return -a;
      break;
    case BinaryOp::Div:
      if (a.is_zero() && !b.is_zero()) return Expr::constant(0.0);
      if (b.is_constant() && b.constant_value() == 1.0) return a;
      break;
    case BinaryOp::Pow:
      if (b.is_constant() && b.constant_value() == 1.0) return a;
      if (b.is_zero()) return Expr::constant(1.0);
      if (a.is_constant() && a.constant_value() == 1.0) return Expr::constant(1.0);
      break;
  }
  Node n(Node::Kind::Binary);
  n.bop = op;
  n.a = a.node_;
  n.b = b.node_;
  n.offset = offset;
  return Expr(make_node(std::move(n)));
}

Expr operator+(const Expr& a, const Expr& b) { return make_binary(BinaryOp::Add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return make_binary(BinaryOp::Sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return make_binary(BinaryOp::Mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return make_binary(BinaryOp::Div, a, b); }
Expr operator-(const Expr& a) { return make_unary(UnaryOp::Neg, a); }
Expr pow(const Expr& a, const Expr& b) { return make_binary(BinaryOp::Pow, a, b); }
Expr sin(const Expr& a) { return make_unary(UnaryOp::Sin, a); }
Expr cos(const Expr& a) { return make_unary(UnaryOp::Cos, a); }
Expr tan(const Expr& a) { return make_unary(UnaryOp::Tan, a); }
Expr sinh(const Expr& a) { return make_unary(UnaryOp::Sinh, a); }
Expr cosh(const Expr& a) { return make_unary(UnaryOp::Cosh, a); }
Expr tanh(const Expr& a) { return make_unary(UnaryOp::Tanh, a); }
Expr exp(const Expr& a) { return make_unary(UnaryOp::Exp, a); }
Expr log(const Expr& a) { return make_unary(UnaryOp::Log, a); }
Expr sqrt(const Expr& a) { return make_unary(UnaryOp::Sqrt, a); }

Expr Expr::diff(std::string_view var) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Node::Kind::Constant:
      return Expr::constant(0.0);
    case Node::Kind::Variable:
      return Expr::constant(n.name == var ? 1.0 : 0.0);
    case Node::Kind::Unary: {
      const Expr a(n.a);
      const Expr da = a.diff(var);
      switch (n.uop) {
        case UnaryOp::Neg: return -da;
        case UnaryOp::Sin: return cos(a) * da;
        case UnaryOp::Cos: return -(sin(a) * da);
        case UnaryOp::Tan: return da / pow(cos(a), Expr::constant(2.0));
        case UnaryOp::Sinh: return cosh(a) * da;
        case UnaryOp::Cosh: return sinh(a) * da;
        case UnaryOp::Tanh: return da / pow(cosh(a), Expr::constant(2.0));
        case UnaryOp::Exp: return exp(a) * da;
        case UnaryOp::Log: return da / a;
        case UnaryOp::Sqrt: return da / (Expr::constant(2.0) * sqrt(a));
      }
      break;
    }
    case Node::Kind::Binary: {
      const Expr a(n.a), b(n.b);
      const Expr da = a.diff(var), db = b.diff(var);
      switch (n.bop) {
        case BinaryOp::Add: return da + db;
        case BinaryOp::Sub: return da - db;
        case BinaryOp::Mul: return da * b + a * db;
        case BinaryOp::Div: return (da * b - a * db) / (b * b);
        case BinaryOp::Pow:
          if (b.is_constant()) {
            const double c = b.constant_value();
            return Expr::constant(c) * pow(a, Expr::constant(c - 1.0)) * da;
          }
          // u^v = exp(v log u)
          return pow(a, b) * (db * log(a) + b * da / a);
      }
      break;
    }
  }
  return Expr::constant(0.0);
}

// ---------------------------------------------------------------------------
// Parser: recursive descent.
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?
//   atom   := number | ident | ident '(' expr ')' | '(' expr ')'
// ---------------------------------------------------------------------------

namespace {

struct Parser {
  std::string_view text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  bool consume(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }

  Expr parse_expression() {
    Expr lhs = parse_term();
    for (;;) {
      const std::size_t at = pos;
      if (consume('+'))
        lhs = make_binary(BinaryOp::Add, lhs, parse_term(), static_cast<long>(at));
      else if (consume('-'))
        lhs = make_binary(BinaryOp::Sub, lhs, parse_term(), static_cast<long>(at));
      else
        return lhs;
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      const std::size_t at = pos;
      if (consume('*'))
        lhs = make_binary(BinaryOp::Mul, lhs, parse_unary(), static_cast<long>(at));
      else if (consume('/'))
        lhs = make_binary(BinaryOp::Div, lhs, parse_unary(), static_cast<long>(at));
      else
        return lhs;
    }
  }

  Expr parse_unary() {
    const std::size_t at = pos;
    if (consume('-')) return make_unary(UnaryOp::Neg, parse_unary(), static_cast<long>(at));
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    const std::size_t at = pos;
    if (consume('^'))
      return make_binary(BinaryOp::Pow, base, parse_unary(), static_cast<long>(at));
    return base;
  }

  Expr parse_atom() {
    skip_ws();
    if (pos >= text.size()) throw ParseError("unexpected end of input", pos);
    const char c = text[pos];
    if (c == '(') {
      ++pos;
      Expr inner = parse_expression();
      if (!consume(')')) throw ParseError("expected ')'", pos);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    throw ParseError(std::string("unexpected character '") + c + "'", pos);
  }

  Expr parse_number() {
    const std::size_t start = pos;
    const char* begin = text.data() + pos;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw ParseError("malformed number", start);
    pos += static_cast<std::size_t>(end - begin);
    Node n(Node::Kind::Constant);
    n.value = v;
    n.offset = static_cast<long>(start);
    return Expr::wrap(make_node(std::move(n)));
  }

  Expr parse_ident() {
    const std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    std::string name(text.substr(start, pos - start));
    if (peek() == '(') {
      static const std::map<std::string, UnaryOp, std::less<>> functions = {
          {"sin", UnaryOp::Sin},   {"cos", UnaryOp::Cos},   {"tan", UnaryOp::Tan},
          {"sinh", UnaryOp::Sinh}, {"cosh", UnaryOp::Cosh}, {"tanh", UnaryOp::Tanh},
          {"exp", UnaryOp::Exp},   {"log", UnaryOp::Log},   {"sqrt", UnaryOp::Sqrt}};
      auto it = functions.find(name);
      if (it == functions.end())
        throw ParseError("unknown function '" + name + "'", start);
      ++pos;  // '('
      Expr arg = parse_expression();
      if (!consume(')')) throw ParseError("expected ')' after function argument", pos);
      return make_unary(it->second, arg, static_cast<long>(start));
    }
    Node n(Node::Kind::Variable);
    n.name = std::move(name);
    n.offset = static_cast<long>(start);
    return Expr::wrap(make_node(std::move(n)));
  }
};

}  // namespace

Expr parse_expr(std::string_view text) {
  Parser p{text};
  Expr e = p.parse_expression();
  if (!p.at_end()) throw ParseError("trailing input", p.pos);
  return e;
}

}  // namespace algebroid
