#include "algebroid/compiled.hpp"

#include <algorithm>
#include <cmath>

namespace algebroid {

CompiledExpr::CompiledExpr(const Expr& e, const std::vector<std::string>& slots) {
  source_ = e.str();
  std::size_t cur = 0;
  emit(e.node(), slots, cur, depth_);
}

void CompiledExpr::emit(const Expr::Node& n, const std::vector<std::string>& slots,
                        std::size_t& cur, std::size_t& max) {
  using Kind = Expr::Node::Kind;
  switch (n.kind) {
    case Kind::Constant:
      prog_.push_back({Op::PushConst, 0, n.value});
      max = std::max(max, ++cur);
      return;
    case Kind::Variable: {
      auto it = std::find(slots.begin(), slots.end(), n.name);
      if (it == slots.end())
        throw EvalError("variable '" + n.name + "' not in slot layout", source_, n.offset);
      prog_.push_back({Op::PushSlot, static_cast<int>(it - slots.begin()), 0.0});
      max = std::max(max, ++cur);
      return;
    }
    case Kind::Unary: {
      emit(*n.a, slots, cur, max);
      Op op;
      switch (n.uop) {
        case UnaryOp::Neg: op = Op::Neg; break;
        case UnaryOp::Sin: op = Op::Sin; break;
        case UnaryOp::Cos: op = Op::Cos; break;
        case UnaryOp::Tan: op = Op::Tan; break;
        case UnaryOp::Sinh: op = Op::Sinh; break;
        case UnaryOp::Cosh: op = Op::Cosh; break;
        case UnaryOp::Tanh: op = Op::Tanh; break;
        case UnaryOp::Exp: op = Op::Exp; break;
        case UnaryOp::Log: op = Op::Log; break;
        case UnaryOp::Sqrt: op = Op::Sqrt; break;
        default: op = Op::Neg; break;
      }
      prog_.push_back({op, 0, 0.0});
      return;
    }
    case Kind::Binary: {
      emit(*n.a, slots, cur, max);
      emit(*n.b, slots, cur, max);
      Op op;
      switch (n.bop) {
        case BinaryOp::Add: op = Op::Add; break;
        case BinaryOp::Sub: op = Op::Sub; break;
        case BinaryOp::Mul: op = Op::Mul; break;
        case BinaryOp::Div: op = Op::Div; break;
        case BinaryOp::Pow: op = Op::Pow; break;
        default: op = Op::Add; break;
      }
      prog_.push_back({op, 0, 0.0});
      --cur;
      return;
    }
  }
}

double CompiledExpr::eval(std::span<const double> values) const {
  // Typical programs are shallow; avoid the heap for them.
  double local[32];
  std::vector<double> heap;
  double* st = local;
  if (depth_ > 32) {
    heap.resize(depth_);
    st = heap.data();
  }
  std::size_t top = 0;
  for (const Instr& in : prog_) {
    switch (in.op) {
      case Op::PushConst: st[top++] = in.value; break;
      case Op::PushSlot: st[top++] = values[static_cast<std::size_t>(in.slot)]; break;
      case Op::Neg: st[top - 1] = -st[top - 1]; break;
      case Op::Sin: st[top - 1] = std::sin(st[top - 1]); break;
      case Op::Cos: st[top - 1] = std::cos(st[top - 1]); break;
      case Op::Tan: st[top - 1] = std::tan(st[top - 1]); break;
      case Op::Sinh: st[top - 1] = std::sinh(st[top - 1]); break;
      case Op::Cosh: st[top - 1] = std::cosh(st[top - 1]); break;
      case Op::Tanh: st[top - 1] = std::tanh(st[top - 1]); break;
      case Op::Exp: st[top - 1] = std::exp(st[top - 1]); break;
      case Op::Log:
        if (st[top - 1] <= 0.0) throw EvalError("log of non-positive value", source_, -1);
        st[top - 1] = std::log(st[top - 1]);
        break;
      case Op::Sqrt:
        if (st[top - 1] < 0.0) throw EvalError("sqrt of negative value", source_, -1);
        st[top - 1] = std::sqrt(st[top - 1]);
        break;
      case Op::Add: st[top - 2] += st[top - 1]; --top; break;
      case Op::Sub: st[top - 2] -= st[top - 1]; --top; break;
      case Op::Mul: st[top - 2] *= st[top - 1]; --top; break;
      case Op::Div:
        if (st[top - 1] == 0.0) throw EvalError("division by zero", source_, -1);
        st[top - 2] /= st[top - 1];
        --top;
        break;
      case Op::Pow: {
        const double r = std::pow(st[top - 2], st[top - 1]);
        if (!std::isfinite(r)) throw EvalError("pow out of domain", source_, -1);
        st[top - 2] = r;
        --top;
        break;
      }
    }
  }
  return top ? st[top - 1] : 0.0;
}

std::vector<CompiledExpr> compile_all(const std::vector<Expr>& exprs,
                                      const std::vector<std::string>& slots) {
  std::vector<CompiledExpr> out;
  out.reserve(exprs.size());
  for (const Expr& e : exprs) out.emplace_back(e, slots);
  return out;
}

}  // namespace algebroid
