#pragma once

#include <algorithm>
#include <limits>
#include <set>

#include "templar/gen.hpp"
#include "templar/parse.hpp"

namespace templar {

class ExtractionError : public Error {
public:
  using Error::Error;
};

struct ExtractionConfig {
  /// Declared variables whose initializers become intVal() input holes.
  std::vector<std::string> input_vars = {};
  /// Maximum nesting of hole nodes under a statement root; deeper subtrees stay
  /// concrete.
  std::size_t max_hole_depth = std::numeric_limits<std::size_t>::max();
};

struct Extraction {
  Template templ;
  /// Original content of every hole root, keyed by the template's addresses.
  HoleFillMap originals;
};

namespace detail {

inline ExpPtr extract_exp(const ExpPtr& e, std::size_t depth, std::size_t max_depth) {
  if (depth > max_depth) return e;
  const Exp& x = *e;
  if (const auto* n = std::get_if<Num>(&x.node))
    return int_val(std::min(n->value, kDefaultIntValMin), std::max(n->value, kDefaultIntValMax));
  if (std::holds_alternative<Var>(x.node)) return int_id();
  const auto& b = std::get<Binary>(x.node);
  HoleKind kind = HoleKind::Arithmetic;
  switch (b.op) {
  case BinOp::Add:
  case BinOp::Sub: kind = HoleKind::Arithmetic; break;
  case BinOp::Lt:
  case BinOp::Eq:
  case BinOp::Ne: kind = HoleKind::Relation; break;
  case BinOp::And:
  case BinOp::Or: kind = HoleKind::Logic; break;
  }
  // A converted child whose value type the parent hole rejects stays as written.
  const ValueType rejected = kind == HoleKind::Logic ? ValueType::Int : ValueType::Bool;
  auto child = [&](const ExpPtr& c) {
    ExpPtr conv = extract_exp(c, depth + 1, max_depth);
    return hole_value_type(*conv, {}) == rejected ? c : conv;
  };
  return op_hole(kind, child(b.lhs), child(b.rhs));
}

} // namespace detail

/// Turns a concrete program into a template: each statement-level expression
/// becomes a hole built from its leaves up, and each input variable's
/// initializer becomes intVal(). Labels and jump targets are never templated.
inline Extraction extract_template(const Program& p, const ExtractionConfig& cfg = {}) {
  if (!is_hole_free(p)) throw ExtractionError("extraction needs a hole-free program");
  if (cfg.max_hole_depth == 0) throw ExtractionError("max hole depth must be at least 1");
  std::set<std::string> inputs(cfg.input_vars.begin(), cfg.input_vars.end());
  for (const auto& v : inputs) {
    const bool declared = std::any_of(p.decls.begin(), p.decls.end(), [&](const Decl& d) { return d.name == v; });
    if (!declared) throw ExtractionError("input variable '" + v + "' is not declared");
  }
  Extraction out;
  Template& t = out.templ;
  t = p;
  for (auto& d : t.decls) {
    if (!inputs.contains(d.name)) continue;
    const std::int64_t v = std::get<Num>(d.init->node).value;
    d.init = eval(int_val(std::min(v, kDefaultIntValMin), std::max(v, kDefaultIntValMax)));
  }
  for (auto& s : t.stmts)
    if (ExpPtr* e = stmt_exp(s)) *e = eval(detail::extract_exp(*e, 1, cfg.max_hole_depth));

  for (const auto& site : index(t).holes) {
    const auto& where = site.where;
    out.originals.emplace(site.address, where.in_decl ? p.decls[where.owner].init : *stmt_exp(p.stmts[where.owner]));
  }
  validate(t);
  return out;
}

} // namespace templar
