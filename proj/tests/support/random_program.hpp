#pragma once

// Seeded random programs and templates for property tests.

#include <limits>
#include <random>
#include <set>
#include <string>

#include "templar/templar.hpp"

namespace templar::testing {

struct RandomProgramOptions {
  std::size_t max_stmts = 30;
  std::size_t max_vars = 4;
  std::size_t max_depth = 3;
  /// Emit counted loops; otherwise backward jumps may not terminate.
  bool bounded_loops = true;
  /// Allow unguarded backward jumps (may run until the step budget).
  bool wild_jumps = false;
};

class RandomProgram {
public:
  explicit RandomProgram(std::uint64_t seed, RandomProgramOptions opt = {}) : rng_(seed), opt_(opt) {}

  Program next() {
    Program p;
    const std::size_t nvars = uniform(1, opt_.max_vars);
    vars_.clear();
    writable_.clear();
    for (std::size_t i = 0; i < nvars; ++i) {
      vars_.push_back("v" + std::to_string(i));
      writable_.push_back(vars_.back());
      p.decls.push_back({vars_.back(), num(constant())});
    }
    const std::size_t nstmts = uniform(1, opt_.max_stmts);
    labels_ = 0;
    while (p.stmts.size() < nstmts) append(p, nstmts);
    validate(p);
    return p;
  }

  std::int64_t constant() {
    static constexpr std::int64_t kEdge[] = {0, 1, -1, 2, -2, 7,
                                             std::numeric_limits<std::int64_t>::max(),
                                             std::numeric_limits<std::int64_t>::min(),
                                             std::numeric_limits<std::int64_t>::max() - 1,
                                             std::numeric_limits<std::int64_t>::min() + 1};
    switch (uniform(0, 3)) {
    case 0: return kEdge[uniform(0, std::size(kEdge) - 1)];
    case 1: return static_cast<std::int64_t>(rng_());
    default: return static_cast<std::int64_t>(uniform(0, 20)) - 10;
    }
  }

  ExpPtr exp(std::size_t depth) {
    if (depth == 0 || uniform(0, 2) == 0) {
      if (uniform(0, 1) == 0) return num(constant());
      return var(vars_[uniform(0, vars_.size() - 1)]);
    }
    const BinOp op = kAllBinOps[uniform(0, std::size(kAllBinOps) - 1)];
    return bin(op, exp(depth - 1), exp(depth - 1));
  }

  std::size_t uniform(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  std::mt19937_64& rng() { return rng_; }
  const std::vector<std::string>& vars() const { return vars_; }

private:
  std::string fresh_label() { return "l" + std::to_string(labels_++); }

  void append(Program& p, std::size_t limit) {
    const std::size_t room = limit - p.stmts.size();
    const std::size_t kind = uniform(0, 9);
    if (kind <= 4 || room < 3) {
      p.stmts.push_back({std::nullopt, Assign{target(), exp(opt_.max_depth)}});
      return;
    }
    if (kind <= 6) {
      // Forward conditional skip over a short block.
      const std::string l = fresh_label();
      p.stmts.push_back({std::nullopt, If{exp(opt_.max_depth), l}});
      const std::size_t body = uniform(0, std::min<std::size_t>(3, room - 2));
      for (std::size_t i = 0; i < body; ++i)
        p.stmts.push_back({std::nullopt, Assign{target(), exp(opt_.max_depth)}});
      p.stmts.push_back({l, Assign{target(), exp(opt_.max_depth)}});
      return;
    }
    if (kind == 7 && room >= 3 && uniform(0, 3) == 0) {
      // Early halt guarded by a condition.
      const std::string l = fresh_label();
      p.stmts.push_back({std::nullopt, If{exp(opt_.max_depth), l}});
      p.stmts.push_back({std::nullopt, Halt{}});
      p.stmts.push_back({l, Assign{target(), exp(opt_.max_depth)}});
      return;
    }
    if (opt_.wild_jumps && kind == 8 && !p.stmts.empty()) {
      // Backward jump to an earlier statement, guarded by an arbitrary condition.
      const std::size_t to = uniform(0, p.stmts.size() - 1);
      if (!p.stmts[to].label) p.stmts[to].label = fresh_label();
      p.stmts.push_back({std::nullopt, If{exp(opt_.max_depth), *p.stmts[to].label}});
      return;
    }
    if (opt_.bounded_loops && room >= 5) {
      // Counted loop on a dedicated counter: c = 0; L: body; c = c + 1; if (c < k) L;
      const std::string counter = "c" + std::to_string(labels_);
      p.decls.push_back({counter, num(0)});
      const std::string l = fresh_label();
      p.stmts.push_back({std::nullopt, Assign{counter, num(0)}});
      const std::size_t body = uniform(1, std::min<std::size_t>(4, room - 4));
      for (std::size_t i = 0; i < body; ++i)
        p.stmts.push_back({i == 0 ? std::optional<std::string>(l) : std::nullopt,
                           Assign{target(), exp(opt_.max_depth)}});
      vars_.push_back(counter); // readable afterwards; never an assignment target
      p.stmts.push_back({std::nullopt, Assign{counter, bin(BinOp::Add, var(counter), num(1))}});
      p.stmts.push_back({std::nullopt, If{bin(BinOp::Lt, var(counter), num(static_cast<std::int64_t>(uniform(1, 6)))), l}});
      return;
    }
    p.stmts.push_back({std::nullopt, Assign{target(), exp(opt_.max_depth)}});
  }

  const std::string& target() { return writable_[uniform(0, writable_.size() - 1)]; }

  std::mt19937_64 rng_;
  RandomProgramOptions opt_;
  std::vector<std::string> vars_;
  std::vector<std::string> writable_;
  std::size_t labels_ = 0;
};

} // namespace templar::testing
