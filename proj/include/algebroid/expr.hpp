#ifndef ALGEBROID_EXPR_HPP
#define ALGEBROID_EXPR_HPP

#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace algebroid {

/// Raised by parse_expr; `offset` is the 0-based byte offset into the input.
class ParseError : public std::runtime_error {
public:
  ParseError(std::string msg, std::size_t offset);
  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

/// Raised on evaluation failures (missing variable, log of a non-positive
/// number, division by zero, ...). `where` is the printed subexpression and
/// `offset` its source byte offset, or -1 for synthesized nodes.
class EvalError : public std::runtime_error {
public:
  EvalError(std::string msg, std::string where, long offset);
  const std::string& where() const { return where_; }
  long offset() const { return offset_; }

private:
  std::string where_;
  long offset_;
};

using Binding = std::map<std::string, double, std::less<>>;

enum class UnaryOp { Neg, Sin, Cos, Tan, Sinh, Cosh, Tanh, Exp, Log, Sqrt };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

/// Immutable symbolic expression over named real variables.
///
/// Nodes are shared; copying an Expr is cheap and evaluation is pure, so
/// values can be shared freely across threads. Arithmetic on Expr values
/// constant-folds and applies the 0/1 identities, nothing more.
class Expr {
public:
  struct Node;

  Expr();  // the constant 0
  static Expr constant(double value);
  static Expr variable(std::string name);

  /// Evaluate with every free variable bound. Throws EvalError otherwise.
  double eval(const Binding& binding) const;

  /// Exact symbolic partial derivative with respect to `var`.
  Expr diff(std::string_view var) const;

  /// Printed form; parse_expr(str()) is evaluation-equivalent.
  std::string str() const;

  bool is_constant() const;
  bool is_zero() const;
  double constant_value() const;  // pre: is_constant()

  void collect_variables(std::set<std::string>& out) const;
  std::set<std::string> variables() const;

  const Node& node() const { return *node_; }
  static Expr wrap(std::shared_ptr<const Node> n);

private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;

  friend Expr make_unary(UnaryOp, Expr, long);
  friend Expr make_binary(BinaryOp, Expr, Expr, long);
};

struct Expr::Node {
  enum class Kind { Constant, Variable, Unary, Binary };
  explicit Node(Kind k) : kind(k) {}
  Kind kind;
  double value = 0.0;            // Constant
  std::string name;              // Variable
  UnaryOp uop = UnaryOp::Neg;    // Unary
  BinaryOp bop = BinaryOp::Add;  // Binary
  std::shared_ptr<const Node> a, b;
  long offset = -1;  // byte offset in parsed source, -1 if synthesized
};

// Smart constructors; all Expr arithmetic funnels through these.
Expr make_unary(UnaryOp op, Expr a, long offset = -1);
Expr make_binary(BinaryOp op, Expr a, Expr b, long offset = -1);

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& a, const Expr& b);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr tan(const Expr& a);
Expr sinh(const Expr& a);
Expr cosh(const Expr& a);
Expr tanh(const Expr& a);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sqrt(const Expr& a);

inline Expr operator+(const Expr& a, double b) { return a + Expr::constant(b); }
inline Expr operator+(double a, const Expr& b) { return Expr::constant(a) + b; }
inline Expr operator-(const Expr& a, double b) { return a - Expr::constant(b); }
inline Expr operator-(double a, const Expr& b) { return Expr::constant(a) - b; }
inline Expr operator*(const Expr& a, double b) { return a * Expr::constant(b); }
inline Expr operator*(double a, const Expr& b) { return Expr::constant(a) * b; }
inline Expr operator/(const Expr& a, double b) { return a / Expr::constant(b); }
inline Expr operator/(double a, const Expr& b) { return Expr::constant(a) / b; }

/// Parse a formula. Grammar: numbers, identifiers, + - * / ^, unary minus,
/// function calls sin cos tan sinh cosh tanh exp log sqrt, parentheses.
/// ^ is right-associative and binds tighter than unary minus, so -x^2
/// parses as -(x^2).
Expr parse_expr(std::string_view text);

}  // namespace algebroid

#endif
