#include <gtest/gtest.h>

#include "support/random_program.hpp"

using namespace templar;

namespace {

constexpr std::uint64_t kBudget = 10'000;

std::vector<Trace> all_backends(const Program& p, std::size_t iters, FaultSet faults = {}) {
  std::vector<Trace> out;
  out.push_back(interpret_run(p, iters, kBudget));
  out.push_back(vm_run(compile_bytecode(p), iters, kBudget));
  for (std::size_t t : {1u, 3u, 50u})
    for (int level : {0, 1}) out.push_back(tiered_run(p, iters, t, {level, faults}, kBudget));
  return out;
}

std::int64_t final_value(const Trace& t, const std::string& name) {
  for (std::size_t i = 0; i < t.names.size(); ++i)
    if (t.names[i] == name) return t.snapshots.back().at(i);
  throw std::runtime_error("no variable " + name);
}

} // namespace

TEST(Interpret, ZeroIterationsIsEmpty) {
  const Trace t = interpret_run(parse("var a = 1; halt;"), 0);
  EXPECT_TRUE(t.snapshots.empty());
  EXPECT_FALSE(t.crash);
}

TEST(Interpret, StatePersistsAcrossIterations) {
  const Trace t = interpret_run(parse("var a = 0; a = a + 3; halt;"), 4);
  ASSERT_EQ(t.snapshots.size(), 4u);
  EXPECT_EQ(t.snapshots[3][0], 12);
}

TEST(Interpret, BackEdgeBudgetCrash) {
  const Trace t = interpret_run(parse("var a = 0; a = a + 1; if (a < 10) end; l: goto l; end: halt;"), 20, 100);
  ASSERT_TRUE(t.crash);
  EXPECT_EQ(t.crash->kind, Crash::Kind::StepBudget);
  EXPECT_EQ(t.crash->iteration, 10u);
  EXPECT_EQ(t.snapshots.size(), 9u);
}

TEST(Interpret, UnfilledHoleCrash) {
  const Trace a = interpret_run(parse("var a = intVal().eval(); halt;"), 3);
  ASSERT_TRUE(a.crash);
  EXPECT_EQ(a.crash->kind, Crash::Kind::UnfilledHole);
  EXPECT_EQ(a.crash->iteration, 1u);
  const Trace b = interpret_run(parse("var a = 0; a = a + 1; if (a < 3) end; a = intVal().eval(); end: halt;"), 5);
  ASSERT_TRUE(b.crash);
  EXPECT_EQ(b.crash->iteration, 3u);
  EXPECT_EQ(vm_run(compile_bytecode(parse("var a = 0; a = a + 1; if (a < 3) end; a = intVal().eval(); end: halt;")), 5),
            b);
}

TEST(Compile, HaltOnly) {
  const BytecodeProgram b = compile_bytecode(parse("halt;"));
  EXPECT_EQ(b.code, (std::vector<Instr>{{Opcode::Halt, 0}}));
}

TEST(Compile, ComparisonGuard) {
  const BytecodeProgram b = compile_bytecode(parse("var x = 1; var y = 2; if (x < y) l; l: halt;"));
  const std::vector<Instr> expected{{Opcode::Load, 0}, {Opcode::Load, 1}, {Opcode::CmpLt, 0},
                                    {Opcode::JumpIfNonZero, 4}, {Opcode::Halt, 0}};
  EXPECT_EQ(b.code, expected);
}

TEST(Compile, JumpsFollowTheLabelGraph) {
  // Every jump leaves its statement only towards the start of the labelled target.
  templar::testing::RandomProgram gen(31, {.wild_jumps = true});
  for (int i = 0; i < 500; ++i) {
    const Program p = gen.next();
    const BytecodeProgram b = compile_bytecode(p);
    ASSERT_EQ(b.stmt_offset.size(), p.stmts.size());
    std::map<std::string, std::uint32_t> label_at;
    for (std::size_t s = 0; s < p.stmts.size(); ++s)
      if (p.stmts[s].label) label_at[*p.stmts[s].label] = b.stmt_offset[s];
    for (std::size_t s = 0; s < p.stmts.size(); ++s) {
      const std::uint32_t lo = b.stmt_offset[s];
      const std::uint32_t hi = s + 1 < p.stmts.size() ? b.stmt_offset[s + 1] : static_cast<std::uint32_t>(b.code.size());
      std::optional<std::uint32_t> target;
      if (const auto* f = std::get_if<If>(&p.stmts[s].kind)) target = label_at.at(f->label);
      if (const auto* g = std::get_if<Goto>(&p.stmts[s].kind)) target = label_at.at(g->label);
      bool leaves = false;
      for (std::uint32_t pc = lo; pc < hi; ++pc) {
        if (!is_jump(b.code[pc].op)) continue;
        const std::uint32_t to = b.code[pc].arg;
        if (to >= lo && to <= hi && !(target && to == *target)) continue; // internal
        ASSERT_TRUE(target) << print(p);
        ASSERT_EQ(to, *target) << print(p);
        leaves = true;
      }
      if (target) {
        ASSERT_TRUE(leaves) << print(p);
      }
    }
  }
}

TEST(Equivalence, WrappingArithmetic) {
  const Program p = parse(
      "var a = 9223372036854775807; var b = -9223372036854775808; var c = 0;\n"
      "a = a + 1; b = b - 1; c = a < b; halt;");
  for (const Trace& t : all_backends(p, 1)) {
    EXPECT_EQ(final_value(t, "a"), std::numeric_limits<std::int64_t>::min());
    EXPECT_EQ(final_value(t, "b"), std::numeric_limits<std::int64_t>::max());
    EXPECT_EQ(final_value(t, "c"), 1);
  }
}

TEST(Equivalence, RandomProgramsAllBackends) {
  templar::testing::RandomProgram gen(41);
  for (int i = 0; i < 1500; ++i) {
    const Program p = gen.next();
    const auto traces = all_backends(p, 12);
    for (std::size_t k = 1; k < traces.size(); ++k) ASSERT_EQ(traces[k], traces[0]) << "backend " << k << "\n" << print(p);
  }
}

TEST(Equivalence, WildJumpsAgreeOnCrashes) {
  templar::testing::RandomProgram gen(43, {.max_stmts = 20, .wild_jumps = true});
  int crashed = 0;
  for (int i = 0; i < 800; ++i) {
    const Program p = gen.next();
    const auto traces = all_backends(p, 6);
    crashed += traces[0].crash.has_value();
    for (std::size_t k = 1; k < traces.size(); ++k) ASSERT_EQ(traces[k], traces[0]) << "backend " << k << "\n" << print(p);
  }
  EXPECT_GT(crashed, 0); // the budget path is exercised
}

TEST(Optimizer, FoldsConstants) {
  const BytecodeProgram b = optimize(compile_bytecode(parse("var a = 0; a = 3 + 4; halt;")));
  ASSERT_GE(b.code.size(), 2u);
  EXPECT_EQ(b.code[0].op, Opcode::PushConst);
  EXPECT_EQ(b.constants.at(b.code[0].arg), 7);
  EXPECT_EQ(b.code[1], (Instr{Opcode::Store, 0}));
}

TEST(Optimizer, DropsDeadBranch) {
  const BytecodeProgram base = compile_bytecode(parse("var a = 0; if (1 < 0) l; a = 5; a = a - 1; l: halt;"));
  const BytecodeProgram b = optimize(base);
  EXPECT_LT(b.code.size(), base.code.size());
  for (const Instr& i : b.code) EXPECT_NE(i.op, Opcode::JumpIfNonZero);
}

TEST(Optimizer, SoundAndStable) {
  templar::testing::RandomProgram gen(47, {.wild_jumps = true});
  for (int i = 0; i < 1000; ++i) {
    const Program p = gen.next();
    const BytecodeProgram base = compile_bytecode(p);
    const Trace want = vm_run(base, 5, kBudget);
    for (int level : {0, 1}) {
      const BytecodeProgram once = optimize(base, {level, {}});
      const BytecodeProgram twice = optimize(once, {level, {}});
      ASSERT_EQ(vm_run(once, 5, kBudget), want) << print(p);
      ASSERT_EQ(vm_run(twice, 5, kBudget), want) << print(p);
      ASSERT_LE(once.code.size(), base.code.size());
      ASSERT_LE(twice.code.size(), once.code.size());
    }
  }
}

TEST(Faults, EachFaultHasAWitness) {
  struct Case {
    Fault fault;
    const char* program;
  };
  const Case cases[] = {
      {Fault::FoldLtSwap, "var a = 0; a = 1 < 2; halt;"},
      {Fault::SatAddFold, "var a = 0; a = 9223372036854775807 + 1; halt;"},
      {Fault::NeqSelfTrue, "var a = 0; var b = 5; a = b != b; halt;"},
  };
  for (const Case& c : cases) {
    const Program p = parse(c.program);
    const Trace ref = interpret_run(p, 2);
    EXPECT_EQ(tiered_run(p, 2, 1, {1, {}}), ref) << c.program;
    const Trace bad = tiered_run(p, 2, 1, {1, {c.fault}});
    EXPECT_NE(bad, ref) << to_string(c.fault);
    // Faults stay dormant in the unoptimized tier.
    EXPECT_EQ(tiered_run(p, 2, 3, {1, {c.fault}}), ref);
    // Other faults do not trigger on this witness.
    for (Fault other : kAllFaults)
      if (other != c.fault) {
        EXPECT_EQ(tiered_run(p, 2, 1, {1, {other}}), ref) << to_string(other);
      }
  }
}

TEST(Faults, ParseRoundTrip) {
  for (Fault f : kAllFaults) EXPECT_EQ(parse_fault(to_string(f)), f);
  EXPECT_FALSE(parse_fault("NOPE"));
  EXPECT_EQ(to_string(FaultSet{Fault::SatAddFold, Fault::FoldLtSwap}), "FOLD_LT_SWAP,SAT_ADD_FOLD");
}

TEST(Tiered, ThresholdAboveIterationsMatchesVm) {
  templar::testing::RandomProgram gen(53);
  for (int i = 0; i < 200; ++i) {
    const Program p = gen.next();
    // With every fault on, nothing changes while only the base tier runs.
    const FaultSet all{Fault::FoldLtSwap, Fault::SatAddFold, Fault::NeqSelfTrue};
    ASSERT_EQ(tiered_run(p, 10, 11, {1, all}), vm_run(compile_bytecode(p), 10));
  }
}

TEST(Tiered, SwitchHappensAtThreshold) {
  const Program p = parse("var a = 0; var n = 0; n = n + 1; a = 1 < 2; halt;");
  const Trace t = tiered_run(p, 6, 4, {1, {Fault::FoldLtSwap}});
  ASSERT_EQ(t.snapshots.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(t.snapshots[i][0], i + 1 < 4 ? 1 : 0) << "iteration " << i + 1;
  EXPECT_THROW(tiered_run(p, 1, 0, {}), Error);
}

TEST(Registry, MakeBackend) {
  EXPECT_EQ(make_backend("ref")->name(), "ref");
  EXPECT_EQ(make_backend("vm")->name(), "vm");
  EXPECT_EQ(make_backend("tiered")->name(), "tiered:1000:1");
  EXPECT_EQ(make_backend("tiered:7")->name(), "tiered:7:1");
  EXPECT_EQ(make_backend("tiered:100:0")->name(), "tiered:100:0");
  for (const char* bad : {"jit", "tiered:", "tiered:x", "tiered:0", "tiered:5:2", "tieredx", "tiered:5:1:1"})
    EXPECT_THROW(make_backend(bad), Error) << bad;
}

TEST(Registry, FaultsReachTieredOnly) {
  const Program p = parse("var a = 0; a = 1 < 2; halt;");
  const FaultSet f{Fault::FoldLtSwap};
  EXPECT_EQ(make_backend("ref", f)->run(p, 1), interpret_run(p, 1));
  EXPECT_EQ(make_backend("vm", f)->run(p, 1), interpret_run(p, 1));
  EXPECT_NE(make_backend("tiered:1:1", f)->run(p, 1), interpret_run(p, 1));
}
