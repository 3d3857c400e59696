#ifndef ALGEBROID_COMPILED_HPP
#define ALGEBROID_COMPILED_HPP

#include <span>
#include <string>
#include <vector>

#include "algebroid/expr.hpp"

namespace algebroid {

/// An Expr flattened to a postfix program over a fixed variable-slot layout.
/// Used by the numeric kernels (connection pipeline, integrators, lattice
/// sweeps) where tree evaluation with name lookups is too slow.
class CompiledExpr {
public:
  CompiledExpr() = default;

  /// `slots` fixes the variable order; every free variable of `e` must
  /// appear in it (throws EvalError otherwise).
  CompiledExpr(const Expr& e, const std::vector<std::string>& slots);

  /// Evaluate at `values`, one double per slot. Throws EvalError on domain
  /// errors. Thread-safe: scratch space is local to the call.
  double eval(std::span<const double> values) const;

  std::size_t stack_depth() const { return depth_; }

private:
  enum class Op : unsigned char {
    PushConst, PushSlot,
    Neg, Sin, Cos, Tan, Sinh, Cosh, Tanh, Exp, Log, Sqrt,
    Add, Sub, Mul, Div, Pow
  };
  struct Instr {
    Op op;
    int slot = 0;
    double value = 0.0;
  };
  std::vector<Instr> prog_;
  std::size_t depth_ = 0;
  std::string source_;  // printed form, for error messages

  void emit(const Expr::Node& n, const std::vector<std::string>& slots,
            std::size_t& cur, std::size_t& max);
};

/// Convenience: compile a family of expressions against one slot layout.
std::vector<CompiledExpr> compile_all(const std::vector<Expr>& exprs,
                                      const std::vector<std::string>& slots);

}  // namespace algebroid

#endif
