#pragma once

#include <chrono>
#include <future>
#include <set>
#include <unordered_set>

#include "templar/print.hpp"
#include "templar/prune.hpp"
#include "templar/template.hpp"

namespace templar {

enum class Optimization : std::uint8_t { EarlyStop = 1, HotFill = 2, EagerPrune = 4 };

class OptimizationSet {
public:
  constexpr OptimizationSet() = default;
  constexpr OptimizationSet(std::initializer_list<Optimization> opts) {
    for (auto o : opts) bits_ |= static_cast<std::uint8_t>(o);
  }
  static constexpr OptimizationSet none() { return {}; }
  static constexpr OptimizationSet all() {
    return {Optimization::EarlyStop, Optimization::HotFill, Optimization::EagerPrune};
  }
  /// Subset number 0..7 (bit 0 early stop, bit 1 hot fill, bit 2 eager prune).
  static constexpr OptimizationSet from_bits(std::uint8_t bits) {
    OptimizationSet s;
    s.bits_ = bits & 7u;
    return s;
  }
  constexpr bool has(Optimization o) const { return (bits_ & static_cast<std::uint8_t>(o)) != 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  friend constexpr bool operator==(OptimizationSet, OptimizationSet) = default;

private:
  std::uint8_t bits_ = 0;
};

inline std::string to_string(OptimizationSet s) {
  if (s == OptimizationSet::none()) return "none";
  if (s == OptimizationSet::all()) return "all";
  std::string out;
  auto add = [&](const char* n) {
    if (!out.empty()) out += ',';
    out += n;
  };
  if (s.has(Optimization::EarlyStop)) add("early-stop");
  if (s.has(Optimization::HotFill)) add("hot-fill");
  if (s.has(Optimization::EagerPrune)) add("eager-prune");
  return out;
}

struct GenConfig {
  std::size_t n = 1000;
  std::uint64_t seed = 0xA77ACC;
  std::size_t max_iterations = 100'000;
  OptimizationSet optimizations = OptimizationSet::all();
  std::chrono::milliseconds per_program_timeout{10'000};
  std::chrono::milliseconds overall_timeout{10 * 60'000};
  std::uint64_t step_budget = 10'000'000;
  /// Give up after this many consecutive attempts that produce nothing new.
  std::size_t max_stale_attempts = 1000;
  unsigned jobs = 1;

  /// CI-sized preset.
  static GenConfig desk() {
    GenConfig c;
    c.n = 50;
    c.max_iterations = 2000;
    return c;
  }
};

/// Values of all declared variables, in declaration order.
struct GlobalState {
  std::vector<std::int64_t> values;
  friend bool operator==(const GlobalState&, const GlobalState&) = default;
};

struct GlobalStateHash {
  std::size_t operator()(const GlobalState& s) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::int64_t v : s.values) h = mix64(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

using SeenStates = std::unordered_set<GlobalState, GlobalStateHash>;

inline GlobalState capture_global_state(const Memory& m) { return {m.values()}; }

/// True iff `state` was seen before; otherwise records it.
inline bool early_stop(const GlobalState& state, SeenStates& seen) {
  return !seen.insert(state).second;
}

inline std::size_t count_holes(const Template& t) {
  std::size_t n = 0;
  auto visit = [&](auto&& self, const Exp& e) -> void {
    if (e.eval) ++n;
    for_each_child(e, [&](const ExpPtr& c) { self(self, *c); });
  };
  for (const auto& d : t.decls) visit(visit, *d.init);
  for (const auto& s : t.stmts)
    if (const ExpPtr* e = stmt_exp(s)) visit(visit, **e);
  return n;
}

/// Fresh copy of `t` with each filled hole root replaced by its expression.
inline Program apply_filled_holes(const Template& t, const ProgramIndex& idx, const HoleFillMap& h) {
  Program out = t;
  for (const auto& site : idx.holes) {
    auto it = h.find(site.address);
    if (it != h.end()) substitute(out, site.where, it->second);
  }
  return out;
}

inline Program apply_filled_holes(const Template& t, const HoleFillMap& h) {
  return apply_filled_holes(t, index(t), h);
}

/// Rebuilds Q from T with every hole in H rewritten to concrete code; remaining
/// holes keep their original addresses.
inline WorkingTemplate hot_fill(const WorkingTemplate& q, const Code& t, const HoleFillMap& h) {
  WorkingTemplate out;
  out.code = load(apply_filled_holes(t.program, t.index, h));
  out.mode = q.mode;
  out.identifiers = q.identifiers;
  for (const auto& site : t.index.holes) {
    if (h.contains(site.address) || site.where.in_decl) continue;
    const ExpPtr* p = locate(out.code->program, site.where);
    if (!p) throw InvariantViolation("hot fill lost a hole site");
    out.address_of.emplace(p->get(), site.address);
  }
  return out;
}

/// Statement-level reachability from statement 0 over the label graph.
/// `never_jumps[s]` drops the jump edge of If statement s.
inline std::vector<bool> reachable_statements(const Code& t, const std::vector<bool>& never_jumps) {
  const auto& stmts = t.program.stmts;
  std::vector<bool> seen(stmts.size(), false);
  std::vector<std::size_t> work;
  if (!stmts.empty()) work.push_back(0);
  auto stmt_of = [&](std::size_t instr) { return t.index.instrs[instr].owner; };
  while (!work.empty()) {
    const std::size_t s = work.back();
    work.pop_back();
    if (seen[s]) continue;
    seen[s] = true;
    const auto& k = stmts[s].kind;
    const bool falls = std::holds_alternative<Assign>(k) || std::holds_alternative<If>(k);
    if (falls && s + 1 < stmts.size()) work.push_back(s + 1);
    const bool jumps = std::holds_alternative<Goto>(k) ||
                       (std::holds_alternative<If>(k) && !never_jumps[s]);
    if (jumps) work.push_back(stmt_of(t.index.jump_target[s]));
  }
  return seen;
}

/// Neutralizes If statements whose filled condition is definitely false and the
/// code only reachable through them. Only the working copy changes.
inline WorkingTemplate remove_dead_code(const WorkingTemplate& q, const Code& t, const HoleFillMap& h) {
  WorkingTemplate out = q;
  const auto& stmts = t.program.stmts;
  std::vector<bool> never(stmts.size(), false);
  bool any = false;
  for (std::size_t s = 0; s < stmts.size(); ++s) {
    const auto* i = std::get_if<If>(&stmts[s].kind);
    if (!i) continue;
    ExpPtr cond = i->cond;
    bool filled = true;
    for (const auto& site : t.index.holes) {
      if (site.where.in_decl || site.where.owner != s) continue;
      auto it = h.find(site.address);
      if (it == h.end()) {
        filled = false;
        break;
      }
      cond = replace_at(cond, site.where.path, it->second);
    }
    if (filled && is_definitely_false(*cond) == Satisfiability::DefinitelyFalse) {
      never[s] = true;
      any = true;
    }
  }
  if (!any) return out;
  const auto live = reachable_statements(t, never);
  for (std::size_t s = 0; s < stmts.size(); ++s) {
    if (!live[s]) out.mode[s] = StmtMode::Removed;
    else if (never[s]) out.mode[s] = StmtMode::NeverJumps;
  }
  return out;
}

struct RunStats {
  std::size_t iterations = 0;
  bool all_filled = false;
  bool early_stopped = false;
  std::size_t pruned_statements = 0;
  std::uint64_t steps = 0;
};

/// One generated program with its provenance.
struct GeneratedProgram {
  std::uint64_t index = 0;
  Program program;
  HoleFillMap fills;
  RunStats stats;
};

struct GenerationResult {
  std::vector<GeneratedProgram> programs;
  std::vector<std::string> warnings;
  std::size_t attempts = 0;
  std::size_t failures = 0;
};

/// Drives Generate / RunTemplate for one template.
class Generator {
public:
  Generator(Template t, GenConfig cfg) : cfg_(std::move(cfg)), code_(load(std::move(t))) {
    if (cfg_.n == 0) throw Error("n must be at least 1");
    if (cfg_.max_iterations == 0) throw Error("maxIterations must be at least 1");
    num_holes_ = code_->index.holes.size();
  }

  const GenConfig& config() const { return cfg_; }
  const Template& templ() const { return code_->program; }
  const Code& code() const { return *code_; }
  std::size_t hole_count() const { return num_holes_; }

  /// Initial memory for program index g: literals plus filled input holes.
  Memory initial_state(const StreamKey& key, HoleFillMap* fills = nullptr) const {
    const auto& p = code_->program;
    std::vector<std::string> names;
    std::vector<std::int64_t> values;
    for (std::size_t d = 0; d < p.decls.size(); ++d) {
      names.push_back(p.decls[d].name);
      const Exp& init = *p.decls[d].init;
      if (const auto* n = std::get_if<Num>(&init.node)) {
        values.push_back(n->value);
        continue;
      }
      const HoleSite& site = decl_site(d);
      ChoiceStream stream = key.stream(site.address);
      ExpPtr v = fill(p.decls[d].init, stream, {});
      values.push_back(std::get<Num>(v->node).value);
      if (fills) fills->emplace(site.address, v);
    }
    return Memory(std::move(names), std::move(values));
  }

  /// RunTemplate for program index g.
  GeneratedProgram run_template(std::uint64_t g) const {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + cfg_.per_program_timeout;
    const StreamKey key{cfg_.seed, g};
    const auto opts = cfg_.optimizations;

    GeneratedProgram out;
    out.index = g;
    HoleFillMap& h = out.fills;
    Memory memory = initial_state(key, &h);
    WorkingTemplate q = WorkingTemplate::from(code_);
    SeenStates seen;
    std::size_t hot_filled = 0;
    std::size_t pruned_for = 0;

    for (std::size_t i = 1; i <= cfg_.max_iterations; ++i) {
      ExecResult r = exec_entry(q, memory, key, cfg_.step_budget);
      out.stats.iterations = i;
      out.stats.steps += r.steps;
      h.merge(r.filled);
      if (live_unfilled(q, h) == 0) {
        out.stats.all_filled = h.size() == num_holes_;
        break;
      }
      if (clock::now() > deadline)
        throw GenerationError("per-program timeout exceeded for program index " + std::to_string(g));
      if (opts.has(Optimization::EarlyStop) && early_stop(capture_global_state(memory), seen)) {
        out.stats.early_stopped = true;
        break;
      }
      if (opts.has(Optimization::HotFill) && h.size() != hot_filled) {
        q = hot_fill(q, *code_, h);
        hot_filled = h.size();
      }
      if (opts.has(Optimization::EagerPrune) && h.size() != pruned_for) {
        q = remove_dead_code(q, *code_, h);
        pruned_for = h.size();
      }
    }
    for (StmtMode m : q.mode) out.stats.pruned_statements += m == StmtMode::Removed ? 1 : 0;
    out.program = apply_filled_holes(code_->program, code_->index, h);
    return out;
  }

  /// Generate: n unique programs in generation order.
  GenerationResult generate() const {
    return collect([this](std::uint64_t g) { return run_template(g); });
  }

  /// Static variant: every hole filled from the same keyed streams, no execution.
  GeneratedProgram static_program(std::uint64_t g) const {
    const StreamKey key{cfg_.seed, g};
    std::vector<std::string> ids = declared_names(code_->program);
    std::sort(ids.begin(), ids.end());
    GeneratedProgram out;
    out.index = g;
    for (const auto& site : code_->index.holes) {
      ChoiceStream stream = key.stream(site.address);
      ExpPtr root(code_, site.root);
      out.fills.emplace(site.address, fill(root, stream, ids));
    }
    out.program = apply_filled_holes(code_->program, code_->index, out.fills);
    out.stats.all_filled = true;
    return out;
  }

  GenerationResult static_generate() const {
    return collect([this](std::uint64_t g) { return static_program(g); });
  }

private:
  const HoleSite& decl_site(std::size_t d) const {
    for (const auto& s : code_->index.holes)
      if (s.where.in_decl && s.where.owner == d) return s;
    throw InvariantViolation("declaration hole not indexed");
  }

  /// Unfilled holes outside code removed by pruning.
  std::size_t live_unfilled(const WorkingTemplate& q, const HoleFillMap& h) const {
    std::size_t n = 0;
    for (const auto& site : code_->index.holes) {
      if (h.contains(site.address)) continue;
      if (!site.where.in_decl && q.mode[site.where.owner] == StmtMode::Removed) continue;
      ++n;
    }
    return n;
  }

  template <class Produce>
  GenerationResult collect(Produce produce) const {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + cfg_.overall_timeout;
    GenerationResult res;
    std::unordered_set<std::string> seen;
    std::size_t stale = 0;
    std::string last_error;
    const unsigned jobs = std::max(1u, cfg_.jobs);
    std::uint64_t g = 1;

    // Returns true (recording why) once generation should stop.
    auto finished = [&]() -> bool {
      std::string why;
      if (res.programs.size() >= cfg_.n) return true;
      if (num_holes_ == 0 && !res.programs.empty())
        why = "template has no holes: only 1 unique program exists (requested " +
              std::to_string(cfg_.n) + ")";
      else if (stale >= cfg_.max_stale_attempts)
        why = "search space exhausted: " + std::to_string(stale) +
              " consecutive attempts produced no new program; generated " +
              std::to_string(res.programs.size()) + " of " + std::to_string(cfg_.n);
      else if (clock::now() > deadline)
        why = "overall timeout expired after " + std::to_string(res.programs.size()) + " of " +
              std::to_string(cfg_.n) + " programs";
      if (why.empty()) return false;
      res.warnings.push_back(std::move(why));
      return true;
    };

    for (bool stop = false; !stop; g += jobs) {
      std::vector<std::future<GeneratedProgram>> batch;
      for (unsigned j = 0; j < jobs; ++j)
        batch.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async,
                                   produce, g + j));
      // Results past the stopping point are dropped so the corpus does not
      // depend on the job count.
      for (unsigned j = 0; j < jobs && !stop; ++j) {
        ++res.attempts;
        try {
          GeneratedProgram p = batch[j].get();
          if (seen.insert(print(p.program)).second) {
            res.programs.push_back(std::move(p));
            stale = 0;
          } else {
            ++stale;
          }
        } catch (const GenerationError& e) {
          ++res.failures;
          ++stale;
          last_error = e.what();
        }
        stop = finished();
      }
      for (unsigned j = 0; j < jobs; ++j)
        if (batch[j].valid()) batch[j].wait();
    }
    if (res.programs.empty())
      throw GenerationError("no program generated after " + std::to_string(res.attempts) +
                            " attempts" + (last_error.empty() ? "" : "; last error: " + last_error));
    return res;
  }

  GenConfig cfg_;
  std::shared_ptr<const Code> code_;
  std::size_t num_holes_ = 0;
};

inline GenerationResult generate(const Template& t, const GenConfig& cfg) {
  return Generator(t, cfg).generate();
}

inline GeneratedProgram run_template(const Template& t, std::uint64_t g, const GenConfig& cfg) {
  return Generator(t, cfg).run_template(g);
}

inline GenerationResult static_generate(const Template& t, const GenConfig& cfg) {
  return Generator(t, cfg).static_generate();
}

} // namespace templar
