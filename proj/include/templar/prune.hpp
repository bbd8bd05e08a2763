#pragma once

#include <map>
#include <string>

#include "templar/ast.hpp"
#include "templar/print.hpp"

namespace templar {

/// Three-valued truth: a property holding for every, no, or some valuations.
enum class Truth : std::uint8_t { False, True, Unknown };

enum class Satisfiability : std::uint8_t { DefinitelyFalse, Unknown };

namespace detail {

/// sum(coef[t] * t) + constant, over Z/2^64. Terms are variables or opaque
/// (non-linear) pure subexpressions keyed by their canonical text.
struct LinearForm {
  std::map<std::string, std::uint64_t> coef;
  std::uint64_t constant = 0;

  bool is_constant() const { return coef.empty(); }

  void add(const LinearForm& o, bool negate) {
    for (const auto& [t, c] : o.coef) {
      std::uint64_t& slot = coef[t];
      slot += negate ? 0 - c : c;
      if (slot == 0) coef.erase(t);
    }
    constant += negate ? 0 - o.constant : o.constant;
  }
};

inline LinearForm linearize(const Exp& e) {
  LinearForm f;
  if (const auto* n = std::get_if<Num>(&e.node)) {
    f.constant = static_cast<std::uint64_t>(n->value);
  } else if (const auto* v = std::get_if<Var>(&e.node)) {
    f.coef["v:" + v->name] = 1;
  } else if (const auto* b = std::get_if<Binary>(&e.node);
             b && (b->op == BinOp::Add || b->op == BinOp::Sub)) {
    f = linearize(*b->lhs);
    f.add(linearize(*b->rhs), b->op == BinOp::Sub);
  } else {
    f.coef["t:" + print(e)] = 1;
  }
  return f;
}

inline Truth truth_of(const Exp& e) {
  if (contains_hole(e)) return Truth::Unknown;
  if (const auto* b = std::get_if<Binary>(&e.node)) {
    switch (b->op) {
    case BinOp::And: {
      const Truth l = truth_of(*b->lhs);
      const Truth r = truth_of(*b->rhs);
      if (l == Truth::False || r == Truth::False) return Truth::False;
      if (l == Truth::True && r == Truth::True) return Truth::True;
      return Truth::Unknown;
    }
    case BinOp::Or: {
      const Truth l = truth_of(*b->lhs);
      const Truth r = truth_of(*b->rhs);
      if (l == Truth::True || r == Truth::True) return Truth::True;
      if (l == Truth::False && r == Truth::False) return Truth::False;
      return Truth::Unknown;
    }
    case BinOp::Eq:
    case BinOp::Ne: {
      LinearForm d = linearize(*b->lhs);
      d.add(linearize(*b->rhs), true);
      if (!d.is_constant()) return Truth::Unknown;
      const bool equal = d.constant == 0;
      return (equal == (b->op == BinOp::Eq)) ? Truth::True : Truth::False;
    }
    case BinOp::Lt: {
      // Wrapping makes l - r == c say nothing about l < r unless c == 0
      // (identical values) or both sides are constants.
      const LinearForm l = linearize(*b->lhs);
      const LinearForm r = linearize(*b->rhs);
      if (l.is_constant() && r.is_constant())
        return static_cast<std::int64_t>(l.constant) < static_cast<std::int64_t>(r.constant)
                   ? Truth::True
                   : Truth::False;
      LinearForm d = l;
      d.add(r, true);
      if (d.is_constant() && d.constant == 0) return Truth::False;
      return Truth::Unknown;
    }
    default: break;
    }
  }
  const LinearForm f = linearize(e);
  if (!f.is_constant()) return Truth::Unknown;
  return f.constant != 0 ? Truth::True : Truth::False;
}

} // namespace detail

/// Sound check: DefinitelyFalse only if `e` evaluates to 0 under every valuation.
inline Satisfiability is_definitely_false(const Exp& e) {
  return detail::truth_of(e) == Truth::False ? Satisfiability::DefinitelyFalse
                                             : Satisfiability::Unknown;
}

} // namespace templar
