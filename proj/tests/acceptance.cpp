// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "support/exhaustive.hpp"
#include "support/holes.hpp"
#include "support/random_program.hpp"

using namespace templar;
namespace fs = std::filesystem;

namespace {

// Pinned scales and tolerances.
constexpr std::size_t kSemanticsPrograms = 10'000;
constexpr std::size_t kSemanticsWildPrograms = 2'000;
constexpr std::size_t kSemanticsIters = 100;
constexpr std::size_t kTierThresholds[] = {1, 10, 500};
constexpr std::size_t kCorpusSize = 50;
constexpr std::size_t kBenchMaxIterations = 100'000;
constexpr std::size_t kBenchPrograms = 2;
constexpr int kBenchRuns = 5;
constexpr double kMinHotFillSpeedup = 0.30;
constexpr std::size_t kCampaignIters = 2000;
constexpr std::size_t kFaultCampaignBudget = 200;
constexpr std::size_t kExhaustiveCandidateLimit = 10'000;
constexpr int kIntValDraws = 100'000;
constexpr std::size_t kExtractionPrograms = 1000;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Named {
  std::string id;
  Template templ;
};

std::vector<Named> bundled_templates() {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(TEMPLAR_TEMPLATE_DIR))
    if (e.path().extension() == ".tj") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Named> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream s;
    s << in.rdbuf();
    out.push_back({f.filename().string(), parse(s.str())});
  }
  return out;
}

const Named& find(const std::vector<Named>& ts, const std::string& id) {
  for (const auto& t : ts)
    if (t.id == id) return t;
  throw std::runtime_error("missing bundled template " + id);
}

std::string corpus_bytes(const GenerationResult& r) {
  std::string out;
  for (const auto& p : r.programs) out += print(p.program) + "\n--\n";
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Reference, VM and fault-free tiered runs agree on random programs.
Outcome semantics_oracle() {
  std::size_t mismatches = 0, programs = 0, crashes = 0;
  std::string first;
  auto check = [&](const Program& p, std::uint64_t budget) {
    ++programs;
    const Trace want = interpret_run(p, kSemanticsIters, budget);
    crashes += want.crash.has_value();
    std::vector<Trace> got{vm_run(compile_bytecode(p), kSemanticsIters, budget)};
    for (std::size_t t : kTierThresholds) got.push_back(tiered_run(p, kSemanticsIters, t, {}, budget));
    for (const auto& g : got) {
      if (g == want) continue;
      if (mismatches++ == 0) first = print(p);
      break;
    }
  };
  testing::RandomProgram gen(0x5e3a, {.max_stmts = 30});
  for (std::size_t i = 0; i < kSemanticsPrograms; ++i) check(gen.next(), kDefaultBackEdgeBudget);
  testing::RandomProgram wild(0x5e3b, {.max_stmts = 30, .wild_jumps = true});
  for (std::size_t i = 0; i < kSemanticsWildPrograms; ++i) check(wild.next(), 1000);
  Outcome o{mismatches == 0, std::to_string(programs) + " programs x " + std::to_string(kSemanticsIters) +
                                 " iterations, " + std::to_string(mismatches) + " mismatches, " +
                                 std::to_string(crashes) + " budget crashes (all matched)"};
  if (!first.empty()) o.detail += "; first mismatch:\n" + first;
  return o;
}

// 2. Every optimization subset yields the same corpus.
Outcome neutrality(const std::vector<Named>& ts) {
  std::size_t bad = 0;
  std::string which;
  for (const auto& t : ts) {
    GenConfig c = GenConfig::desk();
    c.n = kCorpusSize;
    c.optimizations = OptimizationSet::none();
    const std::string base = corpus_bytes(generate(t.templ, c));
    for (std::uint8_t bits = 1; bits < 8; ++bits) {
      c.optimizations = OptimizationSet::from_bits(bits);
      if (corpus_bytes(generate(t.templ, c)) == base) continue;
      ++bad;
      which += " " + t.id + "[" + to_string(c.optimizations) + "]";
    }
  }
  return {ts.size() >= 10 && find(ts, "guarded_loop.tj").id == "guarded_loop.tj" && bad == 0,
          std::to_string(ts.size()) + " templates x 8 subsets, n=" + std::to_string(kCorpusSize) + ", " +
              std::to_string(bad) + " differing corpora" + which};
}

// 3. Hot filling speeds up generation on the 50-hole benchmark.
Outcome hot_fill_speedup(const std::vector<Named>& ts) {
  const Template& t = find(ts, "bench50.tj").templ;
  auto median_time = [&](OptimizationSet opts, std::string& corpus) {
    GenConfig c;
    c.n = kBenchPrograms;
    c.max_iterations = kBenchMaxIterations;
    c.optimizations = opts;
    c.per_program_timeout = std::chrono::minutes(10);
    std::vector<double> times;
    for (int i = 0; i < kBenchRuns; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      corpus = corpus_bytes(generate(t, c));
      times.push_back(seconds_since(t0));
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
  };
  std::string plain, hot;
  const double slow = median_time(OptimizationSet::none(), plain);
  const double fast = median_time({Optimization::HotFill}, hot);
  const double gain = 1.0 - fast / slow;
  char buf[160];
  std::snprintf(buf, sizeof buf, "holes=%zu, no opts %.3fs, hot fill %.3fs, %.1f%% faster (need >= %.0f%%)",
                count_holes(t), slow, fast, 100 * gain, 100 * kMinHotFillSpeedup);
  return {count_holes(t) == 50 && plain == hot && gain >= kMinHotFillSpeedup, buf};
}

// 4. Execution-based fills are all reached; static fills are not.
Outcome reachability(const std::vector<Named>& ts) {
  std::size_t programs = 0, short_of_one = 0;
  for (const auto& t : ts) {
    GenConfig c = GenConfig::desk();
    c.n = kCorpusSize;
    for (const auto& g : generate(t.templ, c).programs) {
      ++programs;
      const Reachability r = measure_reachability(t.templ, g, g.stats.iterations);
      if (r.reached != r.filled) ++short_of_one;
    }
  }
  GenConfig c = GenConfig::desk();
  c.n = kCorpusSize;
  const Template& dead = find(ts, "dead_branch.tj").templ;
  std::size_t filled = 0, reached = 0;
  for (const auto& g : static_generate(dead, c).programs) {
    const Reachability r = measure_reachability(dead, g, c.max_iterations);
    filled += r.filled;
    reached += r.reached;
  }
  const double stat = filled ? static_cast<double>(reached) / static_cast<double>(filled) : 1.0;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu execution-based programs, %zu below 1.0; static dead_branch.tj %.3f", programs,
                short_of_one, stat);
  return {short_of_one == 0 && stat < 1.0, buf};
}

// 5. No reports without faults; each fault is caught.
Outcome harness_validity(const std::vector<Named>& ts) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<CampaignTemplate> all;
  for (const auto& t : ts) all.push_back({t.id, t.templ});
  CampaignConfig clean;
  clean.gen.n = kCorpusSize;
  clean.iters = kCampaignIters;
  clean.backends = {"ref", "vm", "tiered:100:1"};
  clean.jobs = std::max(1u, std::thread::hardware_concurrency());
  const CampaignResult base = campaign(all, clean);
  std::string detail = "clean: " + std::to_string(base.summary.programs) + " programs, " +
                       std::to_string(base.reports.size()) + " reports";
  bool pass = base.reports.empty() && base.summary.programs > 0;
  for (Fault f : kAllFaults) {
    CampaignConfig faulty = clean;
    faulty.faults = {f};
    faulty.gen.n = kFaultCampaignBudget / ts.size();
    const CampaignResult r = campaign(all, faulty);
    detail += "; " + std::string(to_string(f)) + ": " + std::to_string(r.summary.divergence) + " divergences in " +
              std::to_string(r.summary.programs) + " programs";
    pass = pass && r.summary.programs <= kFaultCampaignBudget && r.summary.divergence >= 1;
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "; %.1fs", seconds_since(t0));
  return {pass && seconds_since(t0) < 600, detail + buf};
}

// 6. Holes: single fill per run, candidate membership, range containment, run independence.
Outcome hole_semantics(const std::vector<Named>& ts) {
  std::size_t failures = 0;
  std::string notes;
  auto fail = [&](const std::string& what) {
    if (failures++ < 3) notes += " " + what + ";";
  };

  // A hole keeps one fill for the whole run: the filled program replays the
  // generating run exactly, iteration by iteration.
  std::size_t replays = 0;
  for (const auto& t : ts) {
    GenConfig c = GenConfig::desk();
    c.optimizations = OptimizationSet::none();
    const Generator gen(t.templ, c);
    for (std::uint64_t g = 1; g <= 10; ++g) {
      const GeneratedProgram out = gen.run_template(g);
      WorkingTemplate q = WorkingTemplate::from(load(t.templ));
      Memory m = gen.initial_state(StreamKey{c.seed, g});
      std::vector<Snapshot> snaps;
      for (std::size_t i = 0; i < out.stats.iterations; ++i) {
        const ExecResult r = exec_entry(q, m, StreamKey{c.seed, g}, c.step_budget);
        for (const auto& [addr, e] : r.filled)
          if (auto it = out.fills.find(addr); it == out.fills.end() || print(*it->second) != print(*e))
            fail(t.id + " refilled address " + std::to_string(addr.value));
        snaps.push_back(m.values());
      }
      ++replays;
      if (interpret_run(out.program, out.stats.iterations).snapshots != snaps) fail(t.id + " replay differs");
    }
  }

  // Exhaustive candidate membership.
  testing::RandomHole holes(0xc0de);
  const std::vector<std::string> ids{"a", "b", "c"};
  std::size_t exhaustive = 0;
  for (int i = 0; i < 1000; ++i) {
    const ExpPtr h = holes.root();
    const auto all = testing::enumerate(*h, ids);
    if (all.size() > kExhaustiveCandidateLimit) continue;
    ++exhaustive;
    std::set<std::string> seen;
    for (std::uint64_t g = 0; g < 20 * all.size() + 50; ++g) {
      ChoiceStream s(1, g, HoleAddress{static_cast<std::size_t>(i)});
      const std::string got = print(*fill(h, s, ids));
      if (!all.contains(got)) fail("non-candidate " + got + " for " + print(*h));
      if (all.size() <= 64) seen.insert(got);
    }
    if (all.size() <= 64 && seen != all) fail("unreached candidates of " + print(*h));
  }

  // IntVal containment.
  const std::pair<std::int64_t, std::int64_t> ranges[] = {
      {kDefaultIntValMin, kDefaultIntValMax},
      {-3, 3},
      {std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::max()},
      {std::numeric_limits<std::int64_t>::max() - 2, std::numeric_limits<std::int64_t>::max()}};
  for (auto [lo, hi] : ranges) {
    ChoiceStream s(7, 7, HoleAddress{7});
    for (int i = 0; i < kIntValDraws; ++i) {
      const std::int64_t v = std::get<Num>(fill(int_val(lo, hi), s, {})->node).value;
      if (v < lo || v > hi) fail("intVal out of range");
    }
  }

  // Run independence: a program index's fills do not depend on which indices ran before.
  for (const auto& t : ts) {
    GenConfig c = GenConfig::desk();
    const Generator gen(t.templ, c);
    std::map<std::uint64_t, std::string> forward;
    for (std::uint64_t g = 1; g <= 20; ++g) forward[g] = print(gen.run_template(g).program);
    for (std::uint64_t g = 20; g >= 1; --g)
      if (print(gen.run_template(g).program) != forward[g]) fail(t.id + " index " + std::to_string(g) + " changed");
  }

  return {failures == 0, std::to_string(replays) + " replays, " + std::to_string(exhaustive) +
                             " holes checked exhaustively, " + std::to_string(std::size(ranges)) + " ranges x " +
                             std::to_string(kIntValDraws) + " draws, " + std::to_string(failures) + " failures" +
                             notes};
}

// 7. The pruning oracle never flags a satisfiable condition.
Outcome pruning_soundness() {
  std::size_t checked = 0, flagged = 0, unsound = 0;
  std::string first;
  testing::for_each_small_expression([&](const ExpPtr& e) {
    ++checked;
    if (is_definitely_false(*e) != Satisfiability::DefinitelyFalse) return;
    ++flagged;
    if (testing::satisfying_assignment(*e) && unsound++ == 0) first = print(*e);
  });
  return {unsound == 0, std::to_string(checked) + " expressions, " + std::to_string(flagged) +
                            " flagged definitely false, " + std::to_string(unsound) + " unsound" +
                            (first.empty() ? "" : " (e.g. " + first + ")")};
}

// 8. Filling an extracted template with the original choices gives back the source.
Outcome extraction_inverse() {
  testing::RandomProgram gen(0xe47);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < kExtractionPrograms; ++i) {
    const Program p = gen.next();
    std::vector<std::string> inputs;
    for (const auto& d : p.decls)
      if (gen.uniform(0, 2) == 0) inputs.push_back(d.name);
    const Extraction x = extract_template(p, {.input_vars = inputs});
    if (print(apply_filled_holes(x.templ, x.originals)) != print(p)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(kExtractionPrograms) + " programs, " + std::to_string(mismatches) +
                               " mismatches"};
}

} // namespace

int main() {
  const auto templates = bundled_templates();
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"semantics oracle", semantics_oracle},
      {"optimization neutrality", [&] { return neutrality(templates); }},
      {"hot-fill speedup", [&] { return hot_fill_speedup(templates); }},
      {"reachability", [&] { return reachability(templates); }},
      {"harness validity", [&] { return harness_validity(templates); }},
      {"hole semantics", [&] { return hole_semantics(templates); }},
      {"pruning soundness", pruning_soundness},
      {"extraction inverse fill", extraction_inverse},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, run] : criteria) {
    ++n;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    char took[32];
    std::snprintf(took, sizeof took, " [%.1fs]", seconds_since(t0));
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " " << name << ": " << o.detail << took
              << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
