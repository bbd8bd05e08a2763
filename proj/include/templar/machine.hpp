#pragma once

#include <algorithm>
#include <compare>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "templar/ast.hpp"

namespace templar {

/// Raised when evaluation reaches a hole that nobody is prepared to fill.
class UnfilledHoleError : public InvariantViolation {
public:
  using InvariantViolation::InvariantViolation;
};

// ---------------------------------------------------------------------------
// Memory

/// Global variable store, kept in declaration order.
class Memory {
public:
  Memory() = default;
  Memory(std::vector<std::string> names, std::vector<std::int64_t> values)
      : names_(std::move(names)), values_(std::move(values)) {
    values_.resize(names_.size(), 0);
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::int64_t>& values() const { return values_; }
  std::vector<std::int64_t>& values() { return values_; }

  std::size_t slot(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    throw InvariantViolation("read of undeclared identifier '" + std::string(name) + "'");
  }

  std::int64_t get(std::string_view name) const { return values_[slot(name)]; }
  void set(std::string_view name, std::int64_t v) { values_[slot(name)] = v; }

  /// identifiers(M), lexicographically sorted.
  std::vector<std::string> identifiers() const {
    std::vector<std::string> ids = names_;
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  friend bool operator==(const Memory&, const Memory&) = default;

private:
  std::vector<std::string> names_;
  std::vector<std::int64_t> values_;
};

// ---------------------------------------------------------------------------
// Expression semantics: 64-bit wrapping, C-style truth values.

inline std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
inline std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}

/// Non-short-circuit application; callers handle && and || laziness.
inline std::int64_t apply(BinOp op, std::int64_t a, std::int64_t b) {
  switch (op) {
  case BinOp::Add: return wrap_add(a, b);
  case BinOp::Sub: return wrap_sub(a, b);
  case BinOp::Or: return (a != 0 || b != 0) ? 1 : 0;
  case BinOp::And: return (a != 0 && b != 0) ? 1 : 0;
  case BinOp::Eq: return a == b ? 1 : 0;
  case BinOp::Ne: return a != b ? 1 : 0;
  case BinOp::Lt: return a < b ? 1 : 0;
  }
  return 0;
}

/// Evaluates `e` over `m`. Hole roots are delegated to `on_hole(const Exp&)`,
/// which returns the hole's value.
template <class OnHole>
std::int64_t evaluate(const Exp& e, const Memory& m, OnHole&& on_hole) {
  if (e.is_hole()) return on_hole(e);
  switch (e.node.index()) {
  case 0: return std::get<Num>(e.node).value;
  case 1: return m.get(std::get<Var>(e.node).name);
  default: break;
  }
  const auto& b = std::get<Binary>(e.node);
  const std::int64_t l = evaluate(*b.lhs, m, on_hole);
  if (b.op == BinOp::And && l == 0) return 0;
  if (b.op == BinOp::Or && l != 0) return 1;
  const std::int64_t r = evaluate(*b.rhs, m, on_hole);
  return apply(b.op, l, r);
}

inline std::int64_t evaluate(const Exp& e, const Memory& m) {
  return evaluate(e, m, [](const Exp&) -> std::int64_t {
    throw UnfilledHoleError("evaluation reached an unfilled hole");
  });
}

// ---------------------------------------------------------------------------
// Instruction indexing

/// Instruction-memory index of a hole's root node.
struct HoleAddress {
  std::size_t value = 0;
  friend auto operator<=>(const HoleAddress&, const HoleAddress&) = default;
};

/// Where a node lives: owning statement (or declaration) plus child path.
struct SiteLocator {
  bool in_decl = false;
  std::size_t owner = 0;
  std::vector<std::uint32_t> path;
  friend auto operator<=>(const SiteLocator&, const SiteLocator&) = default;
};

struct HoleSite {
  HoleAddress address;
  SiteLocator where;
  const Exp* root = nullptr;
};

struct Instruction {
  enum class Kind { Statement, Expression };
  Kind kind = Kind::Statement;
  bool in_decl = false;
  std::size_t owner = 0;     // statement or declaration ordinal
  const Exp* exp = nullptr;  // for expressions
};

/// The (I, L) pair plus derived tables. Pointers refer into the indexed program,
/// which must outlive the index.
struct ProgramIndex {
  std::vector<Instruction> instrs;                 // I
  std::map<std::string, std::size_t> labels;       // L
  std::vector<std::size_t> stmt_addr;              // statement ordinal -> index in I
  std::vector<std::size_t> jump_target;            // statement ordinal -> L(label) or npos
  std::vector<HoleSite> holes;                     // eval roots in address order

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
};

namespace detail {

inline void index_exp(ProgramIndex& out, const Exp& e, SiteLocator& where) {
  const std::size_t at = out.instrs.size();
  out.instrs.push_back({Instruction::Kind::Expression, where.in_decl, where.owner, &e});
  if (e.eval) out.holes.push_back({HoleAddress{at}, where, &e});
  std::uint32_t child = 0;
  for_each_child(e, [&](const ExpPtr& c) {
    where.path.push_back(child++);
    index_exp(out, *c, where);
    where.path.pop_back();
  });
}

} // namespace detail

/// Pre-order numbering: statement k's node, then its expression nodes, then the
/// next statement. Declaration initializers follow all statements.
inline ProgramIndex index(const Program& p) {
  ProgramIndex out;
  for (std::size_t s = 0; s < p.stmts.size(); ++s) {
    out.stmt_addr.push_back(out.instrs.size());
    out.instrs.push_back({Instruction::Kind::Statement, false, s, nullptr});
    if (p.stmts[s].label) out.labels[*p.stmts[s].label] = out.instrs.size() - 1;
    if (const ExpPtr* e = stmt_exp(p.stmts[s])) {
      SiteLocator where{false, s, {}};
      detail::index_exp(out, **e, where);
    }
  }
  for (std::size_t d = 0; d < p.decls.size(); ++d) {
    SiteLocator where{true, d, {}};
    detail::index_exp(out, *p.decls[d].init, where);
  }
  out.jump_target.assign(p.stmts.size(), ProgramIndex::npos);
  for (std::size_t s = 0; s < p.stmts.size(); ++s) {
    const std::string* l = nullptr;
    if (const auto* i = std::get_if<If>(&p.stmts[s].kind)) l = &i->label;
    if (const auto* g = std::get_if<Goto>(&p.stmts[s].kind)) l = &g->label;
    if (l) {
      auto it = out.labels.find(*l);
      if (it == out.labels.end()) throw InvariantViolation("undefined label '" + *l + "'");
      out.jump_target[s] = it->second;
    }
  }
  return out;
}

/// Resolves a locator against a program; nullptr when the path does not exist.
inline const ExpPtr* locate(const Program& p, const SiteLocator& where) {
  const ExpPtr* cur = nullptr;
  if (where.in_decl) {
    if (where.owner >= p.decls.size()) return nullptr;
    cur = &p.decls[where.owner].init;
  } else {
    if (where.owner >= p.stmts.size()) return nullptr;
    cur = stmt_exp(p.stmts[where.owner]);
  }
  for (std::uint32_t step : where.path) {
    if (!cur) return nullptr;
    const ExpPtr* found = nullptr;
    std::uint32_t k = 0;
    for_each_child(**cur, [&](const ExpPtr& c) {
      if (k++ == step) found = &c;
    });
    cur = found;
  }
  return cur;
}

/// Returns a copy of `root` with the node at `path` replaced by `repl`.
inline ExpPtr replace_at(const ExpPtr& root, std::span<const std::uint32_t> path, ExpPtr repl) {
  if (path.empty()) return repl;
  Exp copy = *root;
  std::uint32_t k = 0;
  auto rewrite = [&](ExpPtr& c) {
    if (k++ == path.front()) c = replace_at(c, path.subspan(1), repl);
  };
  std::visit(
      [&](auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Binary> || std::is_same_v<T, OpHole>) {
          rewrite(n.lhs);
          rewrite(n.rhs);
        } else if constexpr (std::is_same_v<T, AltHole>) {
          for (auto& c : n.cands) rewrite(c);
        }
      },
      copy.node);
  return std::make_shared<const Exp>(std::move(copy));
}

/// Writes `repl` at `where` inside a program copy.
inline void substitute(Program& p, const SiteLocator& where, ExpPtr repl) {
  ExpPtr* slot = where.in_decl ? &p.decls.at(where.owner).init : stmt_exp(p.stmts.at(where.owner));
  if (!slot) throw InvariantViolation("substitution target has no expression");
  *slot = replace_at(*slot, where.path, std::move(repl));
}

// ---------------------------------------------------------------------------
// Small-step machine for hole-free code

/// A loaded program: the AST with its instruction index. Immutable once built.
struct Code {
  Program program;
  ProgramIndex index;

  explicit Code(Program p) : program(std::move(p)), index(templar::index(program)) {}
  Code(const Code&) = delete;
  Code& operator=(const Code&) = delete;
};

inline std::shared_ptr<const Code> load(Program p) {
  return std::make_shared<const Code>(std::move(p));
}

inline constexpr std::size_t kHalted = ProgramIndex::npos;

/// Machine state <pc, I, M, L>; I and L live in `code`.
struct Config {
  std::size_t pc = 0;
  std::shared_ptr<const Code> code;
  Memory memory;

  bool halted() const { return pc == kHalted; }
};

/// Memory from literal declarations. Input holes must be resolved by the caller.
inline Memory initial_memory(const Program& p) {
  std::vector<std::string> names;
  std::vector<std::int64_t> values;
  for (const auto& d : p.decls) {
    const auto* n = std::get_if<Num>(&d.init->node);
    if (!n) throw UnfilledHoleError("declaration '" + d.name + "' has an unfilled input hole");
    names.push_back(d.name);
    values.push_back(n->value);
  }
  return Memory(std::move(names), std::move(values));
}

inline Config start(std::shared_ptr<const Code> code, Memory m) {
  Config c;
  c.pc = code->program.stmts.empty() ? kHalted : code->index.stmt_addr[0];
  c.code = std::move(code);
  c.memory = std::move(m);
  return c;
}

inline std::size_t next_statement(const Code& code, std::size_t stmt) {
  return stmt + 1 < code.index.stmt_addr.size() ? code.index.stmt_addr[stmt + 1] : kHalted;
}

/// One transition. Evaluation of hole nodes is delegated to `on_hole`.
template <class OnHole>
void step_in_place(Config& c, OnHole&& on_hole) {
  if (c.halted()) throw InvariantViolation("step on a halted configuration");
  const Code& code = *c.code;
  const Instruction& ins = code.index.instrs.at(c.pc);
  if (ins.kind != Instruction::Kind::Statement)
    throw InvariantViolation("pc does not address a statement");
  const std::size_t s = ins.owner;
  const Stmt& st = code.program.stmts[s];
  switch (st.kind.index()) {
  case 0: {
    const auto& a = std::get<Assign>(st.kind);
    const std::int64_t v = evaluate(*a.value, c.memory, on_hole);
    c.memory.set(a.target, v);
    c.pc = next_statement(code, s);
    break;
  }
  case 1: {
    const auto& i = std::get<If>(st.kind);
    const std::int64_t v = evaluate(*i.cond, c.memory, on_hole);
    c.pc = v != 0 ? code.index.jump_target[s] : next_statement(code, s);
    break;
  }
  case 2: c.pc = code.index.jump_target[s]; break;
  default: c.pc = kHalted; break;
  }
}

inline void step_in_place(Config& c) {
  step_in_place(c, [](const Exp&) -> std::int64_t {
    throw UnfilledHoleError("evaluation reached an unfilled hole");
  });
}

/// Functional form of the transition relation.
inline Config step(Config c) {
  step_in_place(c);
  return c;
}

} // namespace templar
