#pragma once

#include <charconv>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "templar/machine.hpp"

namespace templar {

/// Per-iteration limit on taken backward jumps (loop back-edges).
inline constexpr std::uint64_t kDefaultBackEdgeBudget = 1'000'000;

using Snapshot = std::vector<std::int64_t>;

struct Crash {
  enum class Kind { StepBudget, UnfilledHole, Internal };
  Kind kind = Kind::Internal;
  std::size_t iteration = 0; // 1-based iteration that crashed
  std::string message;

  friend bool operator==(const Crash& a, const Crash& b) {
    return a.kind == b.kind && a.iteration == b.iteration;
  }
};

inline std::string_view to_string(Crash::Kind k) {
  switch (k) {
  case Crash::Kind::StepBudget: return "step-budget";
  case Crash::Kind::UnfilledHole: return "unfilled-hole";
  case Crash::Kind::Internal: return "internal";
  }
  return "?";
}

/// Memory snapshot after each completed iteration, and the crash that ended the
/// run early, if any.
struct Trace {
  std::vector<std::string> names;
  std::vector<Snapshot> snapshots;
  std::optional<Crash> crash;

  friend bool operator==(const Trace&, const Trace&) = default;
};

// ---------------------------------------------------------------------------
// Reference interpreter

/// Repeated execution with the small-step machine. Variable values persist
/// across iterations.
inline Trace interpret_run(const Program& p, std::size_t iters,
                           std::uint64_t budget = kDefaultBackEdgeBudget) {
  Trace t;
  t.names = declared_names(p);
  if (iters == 0) return t;
  Memory memory;
  try {
    memory = initial_memory(p);
  } catch (const UnfilledHoleError& e) {
    t.crash = Crash{Crash::Kind::UnfilledHole, 1, e.what()};
    return t;
  }
  auto code = load(p);
  for (std::size_t it = 1; it <= iters; ++it) {
    Config c = start(code, std::move(memory));
    std::uint64_t back_edges = 0;
    try {
      while (!c.halted()) {
        const std::size_t before = c.pc;
        step_in_place(c);
        // Statement fall-through only moves forward; anything else is a jump.
        if (c.pc <= before && ++back_edges > budget) {
          t.crash = Crash{Crash::Kind::StepBudget, it,
                          "back-edge budget of " + std::to_string(budget) + " exhausted"};
          return t;
        }
      }
    } catch (const UnfilledHoleError& e) {
      t.crash = Crash{Crash::Kind::UnfilledHole, it, e.what()};
      return t;
    } catch (const InvariantViolation& e) {
      t.crash = Crash{Crash::Kind::Internal, it, e.what()};
      return t;
    }
    memory = std::move(c.memory);
    t.snapshots.push_back(memory.values());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Bytecode

enum class Opcode : std::uint8_t {
  PushConst, // arg: constant pool index
  Load,      // arg: slot
  Store,     // arg: slot
  Add,
  Sub,
  CmpLt,
  CmpEq,
  CmpNe,
  Jump,          // arg: target offset
  JumpIfZero,    // arg: target offset
  JumpIfNonZero, // arg: target offset
  Trap,          // unfilled hole
  Halt,
};

struct Instr {
  Opcode op;
  std::uint32_t arg = 0;
  friend bool operator==(const Instr&, const Instr&) = default;
};

inline bool is_jump(Opcode op) {
  return op == Opcode::Jump || op == Opcode::JumpIfZero || op == Opcode::JumpIfNonZero;
}

struct BytecodeProgram {
  std::vector<Instr> code;
  std::vector<std::int64_t> constants;
  std::vector<std::string> slots;     // declared variables first, then temporaries
  std::size_t declared = 0;
  std::vector<std::int64_t> initial;  // one per declared slot
  bool unfilled_input = false;        // some declaration is still an input hole
  std::vector<std::uint32_t> stmt_offset; // statement ordinal -> first instruction
};

namespace detail {

class Lowering {
public:
  explicit Lowering(const Program& p) : p_(p) {
    for (const auto& d : p.decls) {
      slot_.emplace(d.name, static_cast<std::uint32_t>(out_.slots.size()));
      out_.slots.push_back(d.name);
      if (const auto* n = std::get_if<Num>(&d.init->node)) {
        out_.initial.push_back(n->value);
      } else {
        out_.initial.push_back(0);
        out_.unfilled_input = true;
      }
    }
    out_.declared = out_.slots.size();
  }

  BytecodeProgram run() {
    std::unordered_map<std::string, std::size_t> label_stmt;
    for (std::size_t s = 0; s < p_.stmts.size(); ++s)
      if (p_.stmts[s].label) label_stmt[*p_.stmts[s].label] = s;
    std::vector<std::pair<std::size_t, std::size_t>> fixups; // instr -> target stmt
    for (std::size_t s = 0; s < p_.stmts.size(); ++s) {
      out_.stmt_offset.push_back(offset());
      const Stmt& st = p_.stmts[s];
      if (const auto* a = std::get_if<Assign>(&st.kind)) {
        value(*a->value);
        emit(Opcode::Store, slot_.at(a->target));
      } else if (const auto* i = std::get_if<If>(&st.kind)) {
        value(*i->cond);
        fixups.emplace_back(offset(), label_stmt.at(i->label));
        emit(Opcode::JumpIfNonZero);
      } else if (const auto* g = std::get_if<Goto>(&st.kind)) {
        fixups.emplace_back(offset(), label_stmt.at(g->label));
        emit(Opcode::Jump);
      } else {
        emit(Opcode::Halt);
      }
    }
    const bool falls_off = p_.stmts.empty() ||
                           !(std::holds_alternative<Halt>(p_.stmts.back().kind) ||
                             std::holds_alternative<Goto>(p_.stmts.back().kind));
    if (falls_off) emit(Opcode::Halt);
    for (auto [at, s] : fixups) out_.code[at].arg = out_.stmt_offset[s];
    return std::move(out_);
  }

private:
  std::uint32_t offset() const { return static_cast<std::uint32_t>(out_.code.size()); }
  void emit(Opcode op, std::uint32_t arg = 0) { out_.code.push_back({op, arg}); }

  std::uint32_t constant(std::int64_t v) {
    auto [it, fresh] = const_.emplace(v, static_cast<std::uint32_t>(out_.constants.size()));
    if (fresh) out_.constants.push_back(v);
    return it->second;
  }

  std::uint32_t temp() {
    out_.slots.push_back("$t" + std::to_string(out_.slots.size() - out_.declared));
    return static_cast<std::uint32_t>(out_.slots.size() - 1);
  }

  static bool lazy(const Exp& e) {
    const auto* b = std::get_if<Binary>(&e.node);
    return b && (b->op == BinOp::And || b->op == BinOp::Or);
  }

  // Leaves the value of `e` on an otherwise empty operand stack. Short-circuit
  // subexpressions that `e` evaluates unconditionally are computed first into
  // temporaries, so every basic block starts and ends with an empty stack.
  void value(const Exp& e) {
    std::unordered_map<const Exp*, std::uint32_t> temps;
    hoist(e, temps);
    straight(e, temps);
  }

  void hoist(const Exp& e, std::unordered_map<const Exp*, std::uint32_t>& temps) {
    if (lazy(e)) {
      temps.emplace(&e, short_circuit(std::get<Binary>(e.node)));
      return;
    }
    if (const auto* b = std::get_if<Binary>(&e.node)) {
      hoist(*b->lhs, temps);
      hoist(*b->rhs, temps);
    }
  }

  void straight(const Exp& e, const std::unordered_map<const Exp*, std::uint32_t>& temps) {
    if (auto it = temps.find(&e); it != temps.end()) return emit(Opcode::Load, it->second);
    if (e.is_hole()) return emit(Opcode::Trap);
    if (const auto* n = std::get_if<Num>(&e.node)) return emit(Opcode::PushConst, constant(n->value));
    if (const auto* v = std::get_if<Var>(&e.node)) return emit(Opcode::Load, slot_.at(v->name));
    const auto& b = std::get<Binary>(e.node);
    straight(*b.lhs, temps);
    straight(*b.rhs, temps);
    switch (b.op) {
    case BinOp::Add: emit(Opcode::Add); break;
    case BinOp::Sub: emit(Opcode::Sub); break;
    case BinOp::Lt: emit(Opcode::CmpLt); break;
    case BinOp::Eq: emit(Opcode::CmpEq); break;
    case BinOp::Ne: emit(Opcode::CmpNe); break;
    default: throw InvariantViolation("short-circuit operator reached straight-line lowering");
    }
  }

  // a && b:  <a> jz F; <b> jz F; push 1; store t; jmp E; F: push 0; store t; E:
  // a || b:  <a> jnz T; <b> jnz T; push 0; store t; jmp E; T: push 1; store t; E:
  std::uint32_t short_circuit(const Binary& b) {
    const bool is_and = b.op == BinOp::And;
    const Opcode test = is_and ? Opcode::JumpIfZero : Opcode::JumpIfNonZero;
    std::vector<std::uint32_t> to_short;
    value(*b.lhs);
    to_short.push_back(offset());
    emit(test);
    value(*b.rhs);
    to_short.push_back(offset());
    emit(test);
    const std::uint32_t t = temp();
    emit(Opcode::PushConst, constant(is_and ? 1 : 0));
    emit(Opcode::Store, t);
    const std::uint32_t jump_end = offset();
    emit(Opcode::Jump);
    for (auto at : to_short) out_.code[at].arg = offset();
    emit(Opcode::PushConst, constant(is_and ? 0 : 1));
    emit(Opcode::Store, t);
    out_.code[jump_end].arg = offset();
    return t;
  }

  const Program& p_;
  BytecodeProgram out_;
  std::unordered_map<std::string, std::uint32_t> slot_;
  std::unordered_map<std::int64_t, std::uint32_t> const_;
};

} // namespace detail

/// Lowers a program to stack bytecode. Unfilled holes become `trap`.
inline BytecodeProgram compile_bytecode(const Program& p) { return detail::Lowering(p).run(); }

/// Runs bytecode `iters` times; declared variables persist across iterations.
inline Trace vm_run(const BytecodeProgram& b, std::size_t iters,
                    std::uint64_t budget = kDefaultBackEdgeBudget);

namespace detail {

/// One iteration. Returns a crash, or nullopt on halt.
inline std::optional<Crash> vm_iteration(const BytecodeProgram& b, std::vector<std::int64_t>& slots,
                                         std::vector<std::int64_t>& stack, std::size_t iteration,
                                         std::uint64_t budget) {
  const Instr* code = b.code.data();
  const std::size_t n = b.code.size();
  std::size_t pc = 0;
  std::uint64_t back_edges = 0;
  stack.clear();
  auto jump = [&](std::size_t target) -> bool {
    if (target <= pc && ++back_edges > budget) return false;
    pc = target;
    return true;
  };
  auto budget_crash = [&]() {
    return Crash{Crash::Kind::StepBudget, iteration,
                 "back-edge budget of " + std::to_string(budget) + " exhausted"};
  };
  while (pc < n) {
    const Instr in = code[pc];
    switch (in.op) {
    case Opcode::PushConst: stack.push_back(b.constants[in.arg]); ++pc; break;
    case Opcode::Load: stack.push_back(slots[in.arg]); ++pc; break;
    case Opcode::Store:
      slots[in.arg] = stack.back();
      stack.pop_back();
      ++pc;
      break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::CmpLt:
    case Opcode::CmpEq:
    case Opcode::CmpNe: {
      const std::int64_t r = stack.back();
      stack.pop_back();
      std::int64_t& l = stack.back();
      switch (in.op) {
      case Opcode::Add: l = wrap_add(l, r); break;
      case Opcode::Sub: l = wrap_sub(l, r); break;
      case Opcode::CmpLt: l = l < r ? 1 : 0; break;
      case Opcode::CmpEq: l = l == r ? 1 : 0; break;
      default: l = l != r ? 1 : 0; break;
      }
      ++pc;
      break;
    }
    case Opcode::Jump:
      if (!jump(in.arg)) return budget_crash();
      break;
    case Opcode::JumpIfZero:
    case Opcode::JumpIfNonZero: {
      const std::int64_t v = stack.back();
      stack.pop_back();
      const bool take = in.op == Opcode::JumpIfZero ? v == 0 : v != 0;
      if (!take) {
        ++pc;
      } else if (!jump(in.arg)) {
        return budget_crash();
      }
      break;
    }
    case Opcode::Trap:
      return Crash{Crash::Kind::UnfilledHole, iteration, "executed an unfilled hole"};
    case Opcode::Halt: return std::nullopt;
    }
  }
  return std::nullopt;
}

inline std::vector<std::int64_t> vm_slots(const BytecodeProgram& b) {
  std::vector<std::int64_t> slots(b.slots.size(), 0);
  std::copy(b.initial.begin(), b.initial.end(), slots.begin());
  return slots;
}

inline void vm_snapshot(const BytecodeProgram& b, const std::vector<std::int64_t>& slots, Trace& t) {
  t.snapshots.emplace_back(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(b.declared));
}

inline std::vector<std::string> vm_names(const BytecodeProgram& b) {
  return {b.slots.begin(), b.slots.begin() + static_cast<std::ptrdiff_t>(b.declared)};
}

} // namespace detail

inline Trace vm_run(const BytecodeProgram& b, std::size_t iters, std::uint64_t budget) {
  Trace t;
  t.names = detail::vm_names(b);
  if (iters == 0) return t;
  if (b.unfilled_input) {
    t.crash = Crash{Crash::Kind::UnfilledHole, 1, "declaration has an unfilled input hole"};
    return t;
  }
  auto slots = detail::vm_slots(b);
  std::vector<std::int64_t> stack;
  stack.reserve(64);
  for (std::size_t it = 1; it <= iters; ++it) {
    if (auto crash = detail::vm_iteration(b, slots, stack, it, budget)) {
      t.crash = std::move(crash);
      return t;
    }
    detail::vm_snapshot(b, slots, t);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Optimizer

enum class Fault : std::uint8_t {
  FoldLtSwap = 1,   // folds a < b as b < a
  SatAddFold = 2,   // folds + with saturating arithmetic
  NeqSelfTrue = 4,  // simplifies x != x to 1
};

class FaultSet {
public:
  constexpr FaultSet() = default;
  constexpr FaultSet(std::initializer_list<Fault> fs) {
    for (auto f : fs) bits_ |= static_cast<std::uint8_t>(f);
  }
  constexpr bool has(Fault f) const { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr void insert(Fault f) { bits_ |= static_cast<std::uint8_t>(f); }
  friend constexpr bool operator==(FaultSet, FaultSet) = default;

private:
  std::uint8_t bits_ = 0;
};

inline constexpr Fault kAllFaults[] = {Fault::FoldLtSwap, Fault::SatAddFold, Fault::NeqSelfTrue};

inline std::string_view to_string(Fault f) {
  switch (f) {
  case Fault::FoldLtSwap: return "FOLD_LT_SWAP";
  case Fault::SatAddFold: return "SAT_ADD_FOLD";
  case Fault::NeqSelfTrue: return "NEQ_SELF_TRUE";
  }
  return "?";
}

inline std::optional<Fault> parse_fault(std::string_view s) {
  for (Fault f : kAllFaults)
    if (to_string(f) == s) return f;
  return std::nullopt;
}

inline std::string to_string(FaultSet fs) {
  std::string out;
  for (Fault f : kAllFaults) {
    if (!fs.has(f)) continue;
    if (!out.empty()) out += ',';
    out += to_string(f);
  }
  return out;
}

/// Optimization level 0 folds constants only; level 1 adds algebraic
/// simplification and dead-branch elimination.
struct OptimizerOptions {
  int level = 1;
  FaultSet faults;
};

namespace detail {

struct SymNode;
using Sym = std::shared_ptr<const SymNode>;

struct SymNode {
  enum class Kind { Const, Load, Trap, Op } kind;
  std::int64_t value = 0;   // Const
  std::uint32_t slot = 0;   // Load
  Opcode op = Opcode::Add;  // Op
  Sym lhs, rhs;
};

inline Sym sym_const(std::int64_t v) {
  return std::make_shared<const SymNode>(SymNode{SymNode::Kind::Const, v, 0, Opcode::Add, {}, {}});
}

inline std::int64_t saturating_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r))
    return a > 0 ? std::numeric_limits<std::int64_t>::max() : std::numeric_limits<std::int64_t>::min();
  return r;
}

class BlockOptimizer {
public:
  BlockOptimizer(const BytecodeProgram& in, OptimizerOptions opt) : in_(in), opt_(opt) {}

  std::optional<BytecodeProgram> run() {
    const auto& code = in_.code;
    const std::size_t n = code.size();
    std::vector<bool> leader(n + 1, false);
    leader[0] = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (is_jump(code[i].op)) {
        leader[code[i].arg] = true;
        leader[i + 1] = true;
      }
      if (code[i].op == Opcode::Halt) leader[i + 1] = true;
    }
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < n; ++i)
      if (leader[i]) starts.push_back(i);

    // Rewrite each block independently; jump args still hold old offsets.
    struct Block {
      std::size_t old_start;
      std::vector<Instr> code;
    };
    std::vector<Block> blocks;
    for (std::size_t k = 0; k < starts.size(); ++k) {
      const std::size_t end = k + 1 < starts.size() ? starts[k + 1] : n;
      auto rewritten = block(starts[k], end);
      if (!rewritten) return std::nullopt;
      blocks.push_back({starts[k], std::move(*rewritten)});
    }

    // Reachability over blocks.
    std::unordered_map<std::size_t, std::size_t> block_at;
    for (std::size_t k = 0; k < blocks.size(); ++k) block_at[blocks[k].old_start] = k;
    std::vector<bool> live(blocks.size(), false);
    std::vector<std::size_t> work{0};
    while (!work.empty()) {
      const std::size_t k = work.back();
      work.pop_back();
      if (k >= blocks.size() || live[k]) continue;
      live[k] = true;
      const auto& c = blocks[k].code;
      bool falls = true;
      if (!c.empty()) {
        const Instr& last = c.back();
        if (is_jump(last.op)) work.push_back(block_at.at(last.arg));
        falls = last.op != Opcode::Jump && last.op != Opcode::Halt;
      }
      if (falls) work.push_back(k + 1);
    }
    if (opt_.level < 1) live.assign(blocks.size(), true);

    BytecodeProgram out;
    out.constants = in_.constants;
    out.slots = in_.slots;
    out.declared = in_.declared;
    out.initial = in_.initial;
    out.unfilled_input = in_.unfilled_input;
    std::unordered_map<std::size_t, std::uint32_t> new_start;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      if (!live[k]) continue;
      new_start[blocks[k].old_start] = static_cast<std::uint32_t>(out.code.size());
      out.code.insert(out.code.end(), blocks[k].code.begin(), blocks[k].code.end());
    }
    // A live block may fall through into a removed one only if the removed one
    // is the end of the program; keep an explicit halt there.
    const std::uint32_t end_offset = static_cast<std::uint32_t>(out.code.size());
    bool needs_end = false;
    for (auto& in : out.code)
      if (is_jump(in.op)) {
        auto it = new_start.find(in.arg);
        if (it == new_start.end()) {
          in.arg = end_offset;
          needs_end = true;
        } else {
          in.arg = it->second;
        }
      }
    if (needs_end || out.code.empty() ||
        (out.code.back().op != Opcode::Halt && out.code.back().op != Opcode::Jump))
      out.code.push_back({Opcode::Halt});
    for (std::uint32_t off : in_.stmt_offset) {
      auto it = new_start.find(off);
      out.stmt_offset.push_back(it == new_start.end() ? end_offset : it->second);
    }
    return out;
  }

private:
  std::optional<std::vector<Instr>> block(std::size_t begin, std::size_t end) {
    std::vector<Instr> out;
    std::vector<Sym> stack;
    for (std::size_t i = begin; i < end; ++i) {
      const Instr in = in_.code[i];
      switch (in.op) {
      case Opcode::PushConst: stack.push_back(sym_const(in_.constants[in.arg])); break;
      case Opcode::Load:
        stack.push_back(std::make_shared<const SymNode>(
            SymNode{SymNode::Kind::Load, 0, in.arg, Opcode::Add, {}, {}}));
        break;
      case Opcode::Trap:
        stack.push_back(std::make_shared<const SymNode>(
            SymNode{SymNode::Kind::Trap, 0, 0, Opcode::Add, {}, {}}));
        break;
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::CmpLt:
      case Opcode::CmpEq:
      case Opcode::CmpNe: {
        if (stack.size() < 2) return std::nullopt;
        Sym r = stack.back();
        stack.pop_back();
        Sym l = stack.back();
        stack.pop_back();
        stack.push_back(simplify(in.op, std::move(l), std::move(r)));
        break;
      }
      case Opcode::Store:
        if (stack.size() != 1) return std::nullopt;
        emit_tree(out, stack.back());
        stack.clear();
        out.push_back(in);
        break;
      case Opcode::JumpIfZero:
      case Opcode::JumpIfNonZero: {
        if (stack.size() != 1) return std::nullopt;
        Sym cond = stack.back();
        stack.clear();
        if (opt_.level >= 1 && cond->kind == SymNode::Kind::Const) {
          const bool take = in.op == Opcode::JumpIfZero ? cond->value == 0 : cond->value != 0;
          if (take) out.push_back({Opcode::Jump, in.arg});
          break;
        }
        emit_tree(out, cond);
        out.push_back(in);
        break;
      }
      case Opcode::Jump:
      case Opcode::Halt:
        if (!stack.empty()) return std::nullopt;
        out.push_back(in);
        break;
      }
    }
    if (!stack.empty()) return std::nullopt;
    return out;
  }

  Sym simplify(Opcode op, Sym l, Sym r) {
    using K = SymNode::Kind;
    const auto& faults = opt_.faults;
    if (l->kind == K::Const && r->kind == K::Const) {
      const std::int64_t a = l->value, b = r->value;
      switch (op) {
      case Opcode::Add:
        return sym_const(faults.has(Fault::SatAddFold) ? saturating_add(a, b) : wrap_add(a, b));
      case Opcode::Sub: return sym_const(wrap_sub(a, b));
      case Opcode::CmpLt: return sym_const(faults.has(Fault::FoldLtSwap) ? (b < a) : (a < b));
      case Opcode::CmpEq: return sym_const(a == b);
      case Opcode::CmpNe: return sym_const(a != b);
      default: break;
      }
    }
    if (opt_.level >= 1) {
      const bool zero_r = r->kind == K::Const && r->value == 0;
      const bool zero_l = l->kind == K::Const && l->value == 0;
      const bool same_load = l->kind == K::Load && r->kind == K::Load && l->slot == r->slot;
      switch (op) {
      case Opcode::Add:
        if (zero_r) return l;
        if (zero_l) return r;
        break;
      case Opcode::Sub:
        if (zero_r) return l;
        if (same_load) return sym_const(0);
        break;
      case Opcode::CmpEq:
        if (same_load) return sym_const(1);
        break;
      case Opcode::CmpNe:
        if (same_load) return sym_const(faults.has(Fault::NeqSelfTrue) ? 1 : 0);
        break;
      case Opcode::CmpLt:
        if (same_load) return sym_const(0);
        break;
      default: break;
      }
    }
    return std::make_shared<const SymNode>(SymNode{K::Op, 0, 0, op, std::move(l), std::move(r)});
  }

  void emit_tree(std::vector<Instr>& out, const Sym& s) {
    switch (s->kind) {
    case SymNode::Kind::Const: out.push_back({Opcode::PushConst, constant(s->value)}); break;
    case SymNode::Kind::Load: out.push_back({Opcode::Load, s->slot}); break;
    case SymNode::Kind::Trap: out.push_back({Opcode::Trap}); break;
    case SymNode::Kind::Op:
      emit_tree(out, s->lhs);
      emit_tree(out, s->rhs);
      out.push_back({s->op});
      break;
    }
  }

  std::uint32_t constant(std::int64_t v) {
    if (pool_.empty())
      for (std::size_t i = 0; i < pool_src().size(); ++i)
        pool_.emplace(pool_src()[i], static_cast<std::uint32_t>(i));
    auto it = pool_.find(v);
    if (it != pool_.end()) return it->second;
    extra_.push_back(v);
    const auto idx = static_cast<std::uint32_t>(pool_src().size() + extra_.size() - 1);
    pool_.emplace(v, idx);
    return idx;
  }
  const std::vector<std::int64_t>& pool_src() const { return in_.constants; }

public:
  std::vector<std::int64_t> extra_;

private:
  const BytecodeProgram& in_;
  OptimizerOptions opt_;
  std::unordered_map<std::int64_t, std::uint32_t> pool_;
};

} // namespace detail

/// Constant folding, algebraic simplification, and dead-branch elimination.
/// Semantics-preserving when `opt.faults` is empty; each fault mis-applies its
/// transform on purpose. Falls back to the input when the code does not have
/// the empty-stack-at-block-boundary shape produced by compile_bytecode.
inline BytecodeProgram optimize(const BytecodeProgram& b, OptimizerOptions opt = {}) {
  detail::BlockOptimizer o(b, opt);
  auto out = o.run();
  if (!out) return b;
  out->constants.insert(out->constants.end(), o.extra_.begin(), o.extra_.end());
  return std::move(*out);
}

// ---------------------------------------------------------------------------
// Tiered execution

/// Unoptimized bytecode for invocations 1..threshold-1, then the optimized tier
/// from invocation `threshold` on. Variable state carries across the switch.
inline Trace tiered_run(const Program& p, std::size_t iters, std::size_t threshold,
                        OptimizerOptions opt, std::uint64_t budget = kDefaultBackEdgeBudget) {
  if (threshold == 0) throw Error("tier threshold must be at least 1");
  const BytecodeProgram base = compile_bytecode(p);
  Trace t;
  t.names = detail::vm_names(base);
  if (iters == 0) return t;
  if (base.unfilled_input) {
    t.crash = Crash{Crash::Kind::UnfilledHole, 1, "declaration has an unfilled input hole"};
    return t;
  }
  auto slots = detail::vm_slots(base);
  std::vector<std::int64_t> stack;
  std::optional<BytecodeProgram> compiled;
  for (std::size_t it = 1; it <= iters; ++it) {
    if (it >= threshold && !compiled) {
      compiled = optimize(base, opt);
      slots.resize(compiled->slots.size(), 0);
    }
    const BytecodeProgram& body = compiled ? *compiled : base;
    if (auto crash = detail::vm_iteration(body, slots, stack, it, budget)) {
      t.crash = std::move(crash);
      return t;
    }
    detail::vm_snapshot(body, slots, t);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Backend registry

class Backend {
public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual Trace run(const Program& p, std::size_t iters) const = 0;
};

class ReferenceBackend final : public Backend {
public:
  explicit ReferenceBackend(std::uint64_t budget = kDefaultBackEdgeBudget) : budget_(budget) {}
  std::string name() const override { return "ref"; }
  Trace run(const Program& p, std::size_t iters) const override {
    return interpret_run(p, iters, budget_);
  }

private:
  std::uint64_t budget_;
};

class VmBackend final : public Backend {
public:
  explicit VmBackend(std::uint64_t budget = kDefaultBackEdgeBudget) : budget_(budget) {}
  std::string name() const override { return "vm"; }
  Trace run(const Program& p, std::size_t iters) const override {
    return vm_run(compile_bytecode(p), iters, budget_);
  }

private:
  std::uint64_t budget_;
};

class TieredBackend final : public Backend {
public:
  TieredBackend(std::size_t threshold, int level, FaultSet faults,
                std::uint64_t budget = kDefaultBackEdgeBudget)
      : threshold_(threshold), opt_{level, faults}, budget_(budget) {
    if (threshold == 0) throw Error("tier threshold must be at least 1");
    if (level != 0 && level != 1) throw Error("optimization level must be 0 or 1");
  }
  std::string name() const override {
    return "tiered:" + std::to_string(threshold_) + ":" + std::to_string(opt_.level);
  }
  Trace run(const Program& p, std::size_t iters) const override {
    return tiered_run(p, iters, threshold_, opt_, budget_);
  }

private:
  std::size_t threshold_;
  OptimizerOptions opt_;
  std::uint64_t budget_;
};

inline constexpr std::size_t kDefaultTierThreshold = 1000;

/// `ref`, `vm`, `tiered`, `tiered:<threshold>`, or `tiered:<threshold>:<optlevel>`.
/// Faults only affect tiered backends.
inline std::unique_ptr<Backend> make_backend(std::string_view spec, FaultSet faults = {}) {
  if (spec == "ref") return std::make_unique<ReferenceBackend>();
  if (spec == "vm") return std::make_unique<VmBackend>();
  if (spec.starts_with("tiered")) {
    std::size_t threshold = kDefaultTierThreshold;
    int level = 1;
    std::string_view rest = spec.substr(6);
    auto number = [&](std::string_view s) -> std::uint64_t {
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size())
        throw Error("bad backend spec '" + std::string(spec) + "'");
      return v;
    };
    if (!rest.empty()) {
      if (rest.front() != ':') throw Error("bad backend spec '" + std::string(spec) + "'");
      rest.remove_prefix(1);
      const auto colon = rest.find(':');
      threshold = number(rest.substr(0, colon));
      if (colon != std::string_view::npos) level = static_cast<int>(number(rest.substr(colon + 1)));
    }
    return std::make_unique<TieredBackend>(threshold, level, faults);
  }
  throw Error("unknown backend '" + std::string(spec) + "'");
}

} // namespace templar
