#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace templar {

/// Base class for every error the library raises.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A precondition of the small-step machine was broken (e.g. stepping a hole).
class InvariantViolation : public Error {
public:
  using Error::Error;
};

enum class BinOp : std::uint8_t { Add, Sub, Or, And, Eq, Ne, Lt };

inline constexpr BinOp kAllBinOps[] = {BinOp::Add, BinOp::Sub, BinOp::Or, BinOp::And,
                                       BinOp::Eq,  BinOp::Ne,  BinOp::Lt};

constexpr std::string_view spelling(BinOp op) {
  switch (op) {
  case BinOp::Add: return "+";
  case BinOp::Sub: return "-";
  case BinOp::Or: return "||";
  case BinOp::And: return "&&";
  case BinOp::Eq: return "==";
  case BinOp::Ne: return "!=";
  case BinOp::Lt: return "<";
  }
  return "?";
}

/// C precedence; larger binds tighter.
constexpr int precedence(BinOp op) {
  switch (op) {
  case BinOp::Or: return 1;
  case BinOp::And: return 2;
  case BinOp::Eq:
  case BinOp::Ne: return 3;
  case BinOp::Lt: return 4;
  case BinOp::Add:
  case BinOp::Sub: return 5;
  }
  return 0;
}

enum class HoleKind : std::uint8_t { Arithmetic, Relation, Logic };

/// Small bitset over BinOp.
class OpSet {
public:
  constexpr OpSet() = default;
  constexpr OpSet(std::initializer_list<BinOp> ops) {
    for (BinOp op : ops) insert(op);
  }

  constexpr void insert(BinOp op) { bits_ |= bit(op); }
  constexpr bool contains(BinOp op) const { return (bits_ & bit(op)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool subset_of(OpSet other) const { return (bits_ & ~other.bits_) == 0; }

  constexpr std::size_t size() const {
    std::size_t n = 0;
    for (BinOp op : kAllBinOps) n += contains(op) ? 1 : 0;
    return n;
  }

  /// Members in enum order; this order drives operator draws.
  std::vector<BinOp> members() const {
    std::vector<BinOp> out;
    for (BinOp op : kAllBinOps)
      if (contains(op)) out.push_back(op);
    return out;
  }

  friend constexpr bool operator==(OpSet, OpSet) = default;

private:
  static constexpr std::uint8_t bit(BinOp op) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(op));
  }
  std::uint8_t bits_ = 0;
};

constexpr OpSet all_ops(HoleKind kind) {
  switch (kind) {
  case HoleKind::Arithmetic: return OpSet{BinOp::Add, BinOp::Sub};
  case HoleKind::Relation: return OpSet{BinOp::Lt, BinOp::Eq, BinOp::Ne};
  case HoleKind::Logic: return OpSet{BinOp::And, BinOp::Or};
  }
  return {};
}

constexpr std::string_view spelling(HoleKind kind) {
  switch (kind) {
  case HoleKind::Arithmetic: return "arithmetic";
  case HoleKind::Relation: return "relation";
  case HoleKind::Logic: return "logic";
  }
  return "?";
}

inline constexpr std::int64_t kDefaultIntValMin = std::numeric_limits<std::int32_t>::min();
inline constexpr std::int64_t kDefaultIntValMax = std::numeric_limits<std::int32_t>::max();

struct Exp;
using ExpPtr = std::shared_ptr<const Exp>;

// Concrete nodes.
struct Num {
  std::int64_t value;
  friend bool operator==(const Num&, const Num&) = default;
};
struct Var {
  std::string name;
  friend bool operator==(const Var&, const Var&) = default;
};
struct Binary {
  BinOp op;
  ExpPtr lhs;
  ExpPtr rhs;
};

// Hole (eAST) nodes.
struct IntValHole {
  std::int64_t min = kDefaultIntValMin;
  std::int64_t max = kDefaultIntValMax;
  friend bool operator==(const IntValHole&, const IntValHole&) = default;
};
struct IntIdHole {
  std::vector<std::string> names; // empty: any identifier in memory
  friend bool operator==(const IntIdHole&, const IntIdHole&) = default;
};
struct OpHole {
  HoleKind kind;
  OpSet ops;
  ExpPtr lhs;
  ExpPtr rhs;
};
struct AltHole {
  std::vector<ExpPtr> cands;
};

struct Exp {
  std::variant<Num, Var, Binary, IntValHole, IntIdHole, OpHole, AltHole> node;
  /// Set on the outermost node of a hole only.
  bool eval = false;

  bool is_hole() const { return node.index() >= 3; }
};

inline bool operator==(const Exp& a, const Exp& b);

inline bool same_tree(const ExpPtr& a, const ExpPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

inline bool operator==(const Binary& a, const Binary& b) {
  return a.op == b.op && same_tree(a.lhs, b.lhs) && same_tree(a.rhs, b.rhs);
}
inline bool operator==(const OpHole& a, const OpHole& b) {
  return a.kind == b.kind && a.ops == b.ops && same_tree(a.lhs, b.lhs) &&
         same_tree(a.rhs, b.rhs);
}
inline bool operator==(const AltHole& a, const AltHole& b) {
  if (a.cands.size() != b.cands.size()) return false;
  for (std::size_t i = 0; i < a.cands.size(); ++i)
    if (!same_tree(a.cands[i], b.cands[i])) return false;
  return true;
}
inline bool operator==(const Exp& a, const Exp& b) { return a.eval == b.eval && a.node == b.node; }

// Builders.
inline ExpPtr num(std::int64_t v) { return std::make_shared<const Exp>(Exp{Num{v}}); }
inline ExpPtr var(std::string name) {
  return std::make_shared<const Exp>(Exp{Var{std::move(name)}});
}
inline ExpPtr bin(BinOp op, ExpPtr l, ExpPtr r) {
  return std::make_shared<const Exp>(Exp{Binary{op, std::move(l), std::move(r)}});
}
inline ExpPtr int_val(std::int64_t lo = kDefaultIntValMin, std::int64_t hi = kDefaultIntValMax) {
  return std::make_shared<const Exp>(Exp{IntValHole{lo, hi}});
}
inline ExpPtr int_id(std::vector<std::string> names = {}) {
  return std::make_shared<const Exp>(Exp{IntIdHole{std::move(names)}});
}
inline ExpPtr op_hole(HoleKind kind, ExpPtr l, ExpPtr r, OpSet ops = {}) {
  if (ops.empty()) ops = all_ops(kind);
  return std::make_shared<const Exp>(Exp{OpHole{kind, ops, std::move(l), std::move(r)}});
}
inline ExpPtr arithmetic(ExpPtr l, ExpPtr r, OpSet ops = {}) {
  return op_hole(HoleKind::Arithmetic, std::move(l), std::move(r), ops);
}
inline ExpPtr relation(ExpPtr l, ExpPtr r, OpSet ops = {}) {
  return op_hole(HoleKind::Relation, std::move(l), std::move(r), ops);
}
inline ExpPtr logic(ExpPtr l, ExpPtr r, OpSet ops = {}) {
  return op_hole(HoleKind::Logic, std::move(l), std::move(r), ops);
}
inline ExpPtr alt(std::vector<ExpPtr> cands) {
  return std::make_shared<const Exp>(Exp{AltHole{std::move(cands)}});
}
/// Marks a hole as evaluated (the `.eval()` suffix).
inline ExpPtr eval(ExpPtr hole) {
  Exp copy = *hole;
  copy.eval = true;
  return std::make_shared<const Exp>(std::move(copy));
}

// Statements.
struct Assign {
  std::string target;
  ExpPtr value;
  friend bool operator==(const Assign& a, const Assign& b) {
    return a.target == b.target && same_tree(a.value, b.value);
  }
};
struct If {
  ExpPtr cond;
  std::string label;
  friend bool operator==(const If& a, const If& b) {
    return a.label == b.label && same_tree(a.cond, b.cond);
  }
};
struct Goto {
  std::string label;
  friend bool operator==(const Goto&, const Goto&) = default;
};
struct Halt {
  friend bool operator==(const Halt&, const Halt&) = default;
};

struct Stmt {
  std::optional<std::string> label;
  std::variant<Assign, If, Goto, Halt> kind;
  friend bool operator==(const Stmt&, const Stmt&) = default;
};

/// `var name = init;` where init is a Num or an `intVal(...).eval()` input hole.
struct Decl {
  std::string name;
  ExpPtr init;
  friend bool operator==(const Decl& a, const Decl& b) {
    return a.name == b.name && same_tree(a.init, b.init);
  }
};

/// A core-language program. A program containing hole nodes is a template.
struct Program {
  std::vector<Decl> decls;
  std::vector<Stmt> stmts;
  friend bool operator==(const Program&, const Program&) = default;
};
using Template = Program;

/// Expression rooted at a statement, or nullptr for goto/halt.
inline const ExpPtr* stmt_exp(const Stmt& s) {
  if (const auto* a = std::get_if<Assign>(&s.kind)) return &a->value;
  if (const auto* i = std::get_if<If>(&s.kind)) return &i->cond;
  return nullptr;
}
inline ExpPtr* stmt_exp(Stmt& s) {
  if (auto* a = std::get_if<Assign>(&s.kind)) return &a->value;
  if (auto* i = std::get_if<If>(&s.kind)) return &i->cond;
  return nullptr;
}

/// Children in pre-order position (lhs before rhs, candidates in order).
template <class F>
void for_each_child(const Exp& e, F&& f) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Binary> || std::is_same_v<T, OpHole>) {
          f(n.lhs);
          f(n.rhs);
        } else if constexpr (std::is_same_v<T, AltHole>) {
          for (const auto& c : n.cands) f(c);
        }
      },
      e.node);
}

inline bool contains_hole(const Exp& e) {
  if (e.is_hole()) return true;
  bool found = false;
  for_each_child(e, [&](const ExpPtr& c) { found = found || contains_hole(*c); });
  return found;
}

inline bool is_hole_free(const Program& p) {
  for (const auto& d : p.decls)
    if (contains_hole(*d.init)) return false;
  for (const auto& s : p.stmts)
    if (const auto* e = stmt_exp(s); e && contains_hole(**e)) return false;
  return true;
}

inline std::vector<std::string> declared_names(const Program& p) {
  std::vector<std::string> out;
  out.reserve(p.decls.size());
  for (const auto& d : p.decls) out.push_back(d.name);
  return out;
}

} // namespace templar
