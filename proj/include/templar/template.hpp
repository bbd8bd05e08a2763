#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <optional>
#include <unordered_map>

#include "templar/choice.hpp"
#include "templar/machine.hpp"

namespace templar {

/// A template could not produce a program (fill failure, step budget, timeout).
class GenerationError : public Error {
public:
  using Error::Error;
};

/// H: hole address -> concrete expression chosen for it.
using HoleFillMap = std::map<HoleAddress, ExpPtr>;

/// Fills a hole eAST with a concrete expression. Draw order is pre-order: an
/// operator node draws its operator, then fills lhs, then rhs; alt draws the
/// candidate index, then fills the candidate. `identifiers` must be sorted.
inline ExpPtr fill(const ExpPtr& h, ChoiceStream& stream, std::span<const std::string> identifiers) {
  const Exp& e = *h;
  switch (e.node.index()) {
  case 0:
  case 1: return h;
  case 2: {
    const auto& b = std::get<Binary>(e.node);
    ExpPtr l = fill(b.lhs, stream, identifiers);
    ExpPtr r = fill(b.rhs, stream, identifiers);
    if (l == b.lhs && r == b.rhs) return h;
    return bin(b.op, std::move(l), std::move(r));
  }
  case 3: {
    const auto& v = std::get<IntValHole>(e.node);
    return num(stream.in_range(v.min, v.max));
  }
  case 4: {
    const auto& id = std::get<IntIdHole>(e.node);
    if (!id.names.empty()) return var(stream.pick(std::span<const std::string>(id.names)));
    if (identifiers.empty())
      throw GenerationError("intId() has no identifiers in memory to choose from");
    return var(stream.pick(identifiers));
  }
  case 5: {
    const auto& o = std::get<OpHole>(e.node);
    const auto ops = o.ops.members();
    const BinOp op = stream.pick(std::span<const BinOp>(ops));
    ExpPtr l = fill(o.lhs, stream, identifiers);
    ExpPtr r = fill(o.rhs, stream, identifiers);
    return bin(op, std::move(l), std::move(r));
  }
  default: {
    const auto& a = std::get<AltHole>(e.node);
    const ExpPtr& c = stream.pick(std::span<const ExpPtr>(a.cands));
    return fill(c, stream, identifiers);
  }
  }
}

/// Candidate-set membership: can `h` fill to exactly `c` over `identifiers`?
inline bool is_candidate(const Exp& h, const Exp& c, std::span<const std::string> identifiers) {
  auto concrete_equal = [&](const Exp& x) {
    Exp plain = x;
    plain.eval = false;
    return plain == c;
  };
  switch (h.node.index()) {
  case 0:
  case 1: return concrete_equal(h);
  case 2: {
    const auto& b = std::get<Binary>(h.node);
    const auto* cb = std::get_if<Binary>(&c.node);
    return cb && cb->op == b.op && is_candidate(*b.lhs, *cb->lhs, identifiers) &&
           is_candidate(*b.rhs, *cb->rhs, identifiers);
  }
  case 3: {
    const auto& v = std::get<IntValHole>(h.node);
    const auto* n = std::get_if<Num>(&c.node);
    return n && v.min <= n->value && n->value <= v.max;
  }
  case 4: {
    const auto& id = std::get<IntIdHole>(h.node);
    const auto* x = std::get_if<Var>(&c.node);
    if (!x) return false;
    const auto& pool = id.names.empty() ? std::vector<std::string>(identifiers.begin(), identifiers.end())
                                        : id.names;
    return std::find(pool.begin(), pool.end(), x->name) != pool.end();
  }
  case 5: {
    const auto& o = std::get<OpHole>(h.node);
    const auto* cb = std::get_if<Binary>(&c.node);
    return cb && o.ops.contains(cb->op) && is_candidate(*o.lhs, *cb->lhs, identifiers) &&
           is_candidate(*o.rhs, *cb->rhs, identifiers);
  }
  default: {
    const auto& a = std::get<AltHole>(h.node);
    for (const auto& cand : a.cands)
      if (is_candidate(*cand, c, identifiers)) return true;
    return false;
  }
  }
}

/// Key of the per-hole choice streams for one generated program.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t program_index = 0;

  ChoiceStream stream(HoleAddress a) const { return ChoiceStream(seed, program_index, a); }
};

enum class StmtMode : std::uint8_t {
  Live,
  NeverJumps, // an If proven never to take its jump
  Removed,    // unreachable; executes as a no-op
};

/// The intermediate program Q of one RunTemplate call. Hole addresses always
/// refer to the original template's numbering.
struct WorkingTemplate {
  std::shared_ptr<const Code> code;
  std::unordered_map<const Exp*, HoleAddress> address_of; // live hole roots in `code`
  std::vector<StmtMode> mode;
  std::vector<std::string> identifiers;                   // sorted

  /// Q <- T.
  static WorkingTemplate from(std::shared_ptr<const Code> t) {
    WorkingTemplate q;
    q.code = std::move(t);
    for (const auto& h : q.code->index.holes) q.address_of.emplace(h.root, h.address);
    q.mode.assign(q.code->program.stmts.size(), StmtMode::Live);
    q.identifiers = declared_names(q.code->program);
    std::sort(q.identifiers.begin(), q.identifiers.end());
    return q;
  }

  std::size_t live_hole_nodes() const { return address_of.size(); }
};

struct ExecResult {
  HoleFillMap filled;   // H' of this run
  std::uint64_t steps = 0;
};

/// Runs the entry once on Q from `memory` (updated in place). Holes are filled
/// on first evaluation and rewritten for the rest of the run.
inline ExecResult exec_entry(const WorkingTemplate& q, Memory& memory, const StreamKey& key,
                             std::uint64_t step_budget) {
  ExecResult out;
  std::unordered_map<const Exp*, ExpPtr> rewritten;
  Config c = start(q.code, std::move(memory));
  auto on_hole = [&](const Exp& root) -> std::int64_t {
    if (auto it = rewritten.find(&root); it != rewritten.end())
      return evaluate(*it->second, c.memory);
    auto at = q.address_of.find(&root);
    if (at == q.address_of.end()) throw InvariantViolation("hole root without an address");
    ChoiceStream stream = key.stream(at->second);
    // The root node object is owned by q.code; wrap without copying ownership.
    ExpPtr alias(q.code, &root);
    ExpPtr concrete = fill(alias, stream, q.identifiers);
    rewritten.emplace(&root, concrete);
    out.filled.emplace(at->second, concrete);
    return evaluate(*concrete, c.memory);
  };
  const auto& index = q.code->index;
  try {
    while (!c.halted()) {
      if (++out.steps > step_budget)
        throw GenerationError("step budget of " + std::to_string(step_budget) +
                              " exhausted; template may not terminate");
      const std::size_t s = index.instrs[c.pc].owner;
      switch (q.mode[s]) {
      case StmtMode::Live: step_in_place(c, on_hole); break;
      case StmtMode::NeverJumps:
      case StmtMode::Removed: c.pc = next_statement(*q.code, s); break;
      }
    }
  } catch (...) {
    memory = std::move(c.memory);
    throw;
  }
  memory = std::move(c.memory);
  return out;
}

/// Convenience form over a fresh template: returns final memory and H'.
inline std::pair<Memory, HoleFillMap> exec_entry(const Template& t, const StreamKey& key,
                                                 std::uint64_t step_budget = 10'000'000) {
  WorkingTemplate q = WorkingTemplate::from(load(t));
  Memory m = initial_memory(t);
  ExecResult r = exec_entry(q, m, key, step_budget);
  return {std::move(m), std::move(r.filled)};
}

} // namespace templar
