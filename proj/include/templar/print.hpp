#pragma once

#include <string>

#include "templar/ast.hpp"

namespace templar {

namespace detail {

inline void print_exp(std::string& out, const Exp& e);

inline void print_operand(std::string& out, const Exp& child, BinOp parent, bool right) {
  const auto* b = std::get_if<Binary>(&child.node);
  bool parens = false;
  if (b) {
    const int cp = precedence(b->op);
    const int pp = precedence(parent);
    parens = cp < pp || (right && cp == pp);
  }
  if (parens) out += '(';
  print_exp(out, child);
  if (parens) out += ')';
}

inline void print_args(std::string& out, const ExpPtr& l, const ExpPtr& r) {
  print_exp(out, *l);
  out += ", ";
  print_exp(out, *r);
}

inline void print_exp(std::string& out, const Exp& e) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Num>) {
          out += std::to_string(n.value);
        } else if constexpr (std::is_same_v<T, Var>) {
          out += n.name;
        } else if constexpr (std::is_same_v<T, Binary>) {
          print_operand(out, *n.lhs, n.op, false);
          out += ' ';
          out += spelling(n.op);
          out += ' ';
          print_operand(out, *n.rhs, n.op, true);
        } else if constexpr (std::is_same_v<T, IntValHole>) {
          out += "intVal(";
          if (n.min != kDefaultIntValMin || n.max != kDefaultIntValMax) {
            out += std::to_string(n.min);
            out += ", ";
            out += std::to_string(n.max);
          }
          out += ')';
        } else if constexpr (std::is_same_v<T, IntIdHole>) {
          out += "intId(";
          for (std::size_t i = 0; i < n.names.size(); ++i) {
            if (i) out += ", ";
            out += n.names[i];
          }
          out += ')';
        } else if constexpr (std::is_same_v<T, OpHole>) {
          out += spelling(n.kind);
          out += '(';
          print_args(out, n.lhs, n.rhs);
          if (n.ops != all_ops(n.kind)) {
            out += ';';
            bool first = true;
            for (BinOp op : n.ops.members()) {
              out += first ? " " : ", ";
              out += spelling(op);
              first = false;
            }
          }
          out += ')';
        } else if constexpr (std::is_same_v<T, AltHole>) {
          out += "alt(";
          for (std::size_t i = 0; i < n.cands.size(); ++i) {
            if (i) out += ", ";
            print_exp(out, *n.cands[i]);
          }
          out += ')';
        }
      },
      e.node);
  if (e.eval) out += ".eval()";
}

} // namespace detail

inline std::string print(const Exp& e) {
  std::string out;
  detail::print_exp(out, e);
  return out;
}

inline std::string print(const Stmt& s) {
  std::string out;
  if (s.label) {
    out += *s.label;
    out += ": ";
  }
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Assign>) {
          out += k.target;
          out += " = ";
          detail::print_exp(out, *k.value);
        } else if constexpr (std::is_same_v<T, If>) {
          out += "if (";
          detail::print_exp(out, *k.cond);
          out += ") ";
          out += k.label;
        } else if constexpr (std::is_same_v<T, Goto>) {
          out += "goto ";
          out += k.label;
        } else {
          out += "halt";
        }
      },
      s.kind);
  out += ';';
  return out;
}

/// Canonical text: declarations first, one item per line, single spaces.
inline std::string print(const Program& p) {
  std::string out;
  for (const auto& d : p.decls) {
    out += "var ";
    out += d.name;
    out += " = ";
    detail::print_exp(out, *d.init);
    out += ";\n";
  }
  for (const auto& s : p.stmts) {
    out += print(s);
    out += '\n';
  }
  return out;
}

} // namespace templar
