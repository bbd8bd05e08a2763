#pragma once

#include <chrono>
#include <future>
#include <optional>

#include "templar/backends.hpp"
#include "templar/gen.hpp"

namespace templar {

// ---------------------------------------------------------------------------
// Checksums

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// FNV-1a over name bytes, 0x00, then the value as 8 little-endian bytes, for
/// each declared variable in declaration order.
inline std::uint64_t checksum_iteration(std::span<const std::string> names,
                                        std::span<const std::int64_t> values) {
  if (names.size() != values.size()) throw InvariantViolation("snapshot/name arity mismatch");
  std::uint64_t h = kFnvOffsetBasis;
  auto byte = [&h](std::uint8_t b) {
    h ^= b;
    h *= kFnvPrime;
  };
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (char c : names[i]) byte(static_cast<std::uint8_t>(c));
    byte(0);
    const auto v = static_cast<std::uint64_t>(values[i]);
    for (int k = 0; k < 8; ++k) byte(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  return h;
}

inline std::uint64_t checksum_iteration(const Memory& m) {
  return checksum_iteration(m.names(), m.values());
}

inline constexpr std::uint64_t fold_checksum(std::uint64_t running, std::uint64_t h) {
  return (running * kFnvPrime) ^ h;
}

/// Running total over a trace's completed iterations, starting from 0.
inline std::uint64_t trace_checksum(const Trace& t) {
  std::uint64_t total = 0;
  for (const auto& s : t.snapshots) total = fold_checksum(total, checksum_iteration(t.names, s));
  return total;
}

// ---------------------------------------------------------------------------
// Differential testing

struct Verdict {
  enum class Kind { Agree, Divergence, Crash, NondetDiscard };
  Kind kind = Kind::Agree;
  std::uint64_t checksum = 0;            // Agree
  std::string backend_a, backend_b;      // Divergence: reference, mismatching backend
  std::uint64_t checksum_a = 0, checksum_b = 0;
  std::string backend;                   // Crash / NondetDiscard
  std::optional<Crash> crash;            // Crash
  std::vector<std::uint64_t> checksums;  // per backend, in input order

  bool agree() const { return kind == Kind::Agree; }
};

inline std::string_view to_string(Verdict::Kind k) {
  switch (k) {
  case Verdict::Kind::Agree: return "agree";
  case Verdict::Kind::Divergence: return "divergence";
  case Verdict::Kind::Crash: return "crash";
  case Verdict::Kind::NondetDiscard: return "nondet-discard";
  }
  return "?";
}

struct DiffOptions {
  /// Reruns of the reference before a divergence is believed.
  std::size_t rechecks = 1;
  /// Reference for the recheck; defaults to the backend named `ref` in the
  /// list, or a fresh reference interpreter.
  const Backend* reference = nullptr;
};

inline Verdict diff_test(const Program& p, std::span<const Backend* const> backends, std::size_t iters,
                         const DiffOptions& opt = {}) {
  if (backends.size() < 2) throw Error("differential testing needs at least two backends");
  Verdict v;
  std::vector<Trace> traces;
  traces.reserve(backends.size());
  for (const Backend* b : backends) {
    traces.push_back(b->run(p, iters));
    v.checksums.push_back(trace_checksum(traces.back()));
  }
  for (std::size_t i = 0; i < backends.size(); ++i) {
    if (traces[i].crash) {
      v.kind = Verdict::Kind::Crash;
      v.backend = backends[i]->name();
      v.crash = traces[i].crash;
      return v;
    }
  }
  if (std::all_of(v.checksums.begin(), v.checksums.end(),
                  [&](std::uint64_t c) { return c == v.checksums.front(); })) {
    v.checksum = v.checksums.front();
    return v;
  }

  // Pick the reference and check that it reproduces itself.
  ReferenceBackend fallback;
  const Backend* ref = opt.reference;
  std::size_t ref_pos = backends.size();
  for (std::size_t i = 0; i < backends.size(); ++i) {
    if ((ref && backends[i] == ref) || (!ref && backends[i]->name() == "ref")) {
      ref_pos = i;
      break;
    }
  }
  if (!ref) ref = ref_pos < backends.size() ? backends[ref_pos] : &fallback;
  const std::uint64_t ref_sum = ref_pos < backends.size() ? v.checksums[ref_pos] : trace_checksum(ref->run(p, iters));
  for (std::size_t k = 0; k < opt.rechecks; ++k) {
    const Trace again = ref->run(p, iters);
    if (again.crash || trace_checksum(again) != ref_sum) {
      v.kind = Verdict::Kind::NondetDiscard;
      v.backend = ref->name();
      return v;
    }
  }
  for (std::size_t i = 0; i < backends.size(); ++i) {
    if (v.checksums[i] == ref_sum) continue;
    v.kind = Verdict::Kind::Divergence;
    v.backend_a = ref->name();
    v.checksum_a = ref_sum;
    v.backend_b = backends[i]->name();
    v.checksum_b = v.checksums[i];
    return v;
  }
  throw InvariantViolation("checksums differ but none differs from the reference");
}

inline Verdict diff_test(const Program& p, const std::vector<std::unique_ptr<Backend>>& backends,
                         std::size_t iters, const DiffOptions& opt = {}) {
  std::vector<const Backend*> raw;
  for (const auto& b : backends) raw.push_back(b.get());
  return diff_test(p, std::span<const Backend* const>(raw), iters, opt);
}

// ---------------------------------------------------------------------------
// Reachability

struct Reachability {
  std::size_t filled = 0;
  std::size_t reached = 0;
  double fraction() const { return filled == 0 ? 1.0 : static_cast<double>(reached) / static_cast<double>(filled); }
};

/// Runs `g.program` for `iters` iterations and counts which filled hole sites of
/// `t` were evaluated. Declaration inputs count as reached. Execution stops at
/// the first unfilled hole or exhausted budget.
inline Reachability measure_reachability(const Template& t, const GeneratedProgram& g, std::size_t iters,
                                         std::uint64_t budget = kDefaultBackEdgeBudget) {
  const ProgramIndex idx = index(t);
  Program marked = g.program;
  Reachability r;
  std::vector<bool> reached;
  std::unordered_map<const Exp*, std::size_t> marker;   // filled: concrete marker root -> ordinal
  std::vector<std::pair<SiteLocator, ExpPtr>> wrap;
  for (const auto& site : idx.holes) {
    auto it = g.fills.find(site.address);
    if (it == g.fills.end()) continue;
    ++r.filled;
    if (site.where.in_decl) {
      ++r.reached;
      continue;
    }
    wrap.emplace_back(site.where, eval(alt({it->second})));
  }
  reached.assign(wrap.size(), false);
  for (const auto& [where, w] : wrap) substitute(marked, where, w);
  auto code = load(std::move(marked));
  for (std::size_t i = 0; i < wrap.size(); ++i) {
    const ExpPtr* at = locate(code->program, wrap[i].first);
    if (!at) throw InvariantViolation("reachability marker lost");
    marker.emplace(at->get(), i);
  }
  Config c;
  try {
    c.memory = initial_memory(code->program);
  } catch (const UnfilledHoleError&) {
    return r;
  }
  auto on_hole = [&](const Exp& root) -> std::int64_t {
    auto it = marker.find(&root);
    if (it == marker.end()) throw UnfilledHoleError("unfilled hole reached");
    reached[it->second] = true;
    return evaluate(*std::get<AltHole>(root.node).cands.front(), c.memory);
  };
  try {
    for (std::size_t it = 0; it < iters; ++it) {
      c = start(code, std::move(c.memory));
      std::uint64_t back_edges = 0;
      while (!c.halted()) {
        const std::size_t before = c.pc;
        step_in_place(c, on_hole);
        if (c.pc <= before && ++back_edges > budget) throw UnfilledHoleError("back-edge budget exhausted");
      }
    }
  } catch (const UnfilledHoleError&) {
  }
  r.reached += static_cast<std::size_t>(std::count(reached.begin(), reached.end(), true));
  return r;
}

// ---------------------------------------------------------------------------
// Campaigns

struct CampaignTemplate {
  std::string id; // path or bundle name; used in repro commands
  Template templ;
};

struct CampaignConfig {
  GenConfig gen = GenConfig::desk();
  std::vector<std::string> backends{"ref", "vm", "tiered:100:1"};
  FaultSet faults;
  std::size_t iters = 2000;
  std::size_t rechecks = 1;
  unsigned jobs = 1;
  std::string program_name = "templar";
};

struct BugReport {
  std::string template_id;
  std::uint64_t program_index = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> backends;
  Verdict verdict;
  std::string program_text;
  std::string repro;
};

struct CampaignSummary {
  std::size_t programs = 0;
  std::size_t agree = 0;
  std::size_t divergence = 0;
  std::size_t crash = 0;
  std::size_t nondet_discard = 0;
  std::size_t generation_failures = 0;
  std::vector<std::string> warnings;
  double generation_seconds = 0;
  double testing_seconds = 0;
};

struct CampaignResult {
  std::vector<BugReport> reports;
  CampaignSummary summary;
};

inline std::string join(const std::vector<std::string>& parts, char sep = ',') {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

inline std::string shell_quote(std::string_view s) {
  const bool plain = !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("-_./:,=+").find(c) != std::string_view::npos;
  });
  if (plain) return std::string(s);
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline std::string repro_command(const CampaignConfig& cfg, const std::string& template_id, std::uint64_t index) {
  std::string cmd = cfg.program_name + " difftest -t " + shell_quote(template_id) +
                    " --seed " + std::to_string(cfg.gen.seed) + " --index " + std::to_string(index) +
                    " --max-iterations " + std::to_string(cfg.gen.max_iterations) +
                    " --backends " + shell_quote(join(cfg.backends)) + " --iters " + std::to_string(cfg.iters);
  if (!cfg.faults.empty()) cmd += " --inject " + to_string(cfg.faults);
  if (cfg.rechecks != 1) cmd += " --rechecks " + std::to_string(cfg.rechecks);
  return cmd;
}

inline std::vector<std::unique_ptr<Backend>> make_backends(const std::vector<std::string>& specs, FaultSet faults) {
  std::vector<std::unique_ptr<Backend>> out;
  for (const auto& s : specs) out.push_back(make_backend(s, faults));
  return out;
}

/// Generates a corpus per template and differential-tests every program.
/// Reports are ordered by template, then generation order.
inline CampaignResult campaign(const std::vector<CampaignTemplate>& templates, const CampaignConfig& cfg) {
  using clock = std::chrono::steady_clock;
  CampaignResult res;
  const auto backends = make_backends(cfg.backends, cfg.faults);
  if (backends.size() < 2) throw Error("a campaign needs at least two backends");
  std::vector<const Backend*> raw;
  for (const auto& b : backends) raw.push_back(b.get());
  const DiffOptions opt{cfg.rechecks, nullptr};
  const unsigned jobs = std::max(1u, cfg.jobs);

  for (const auto& t : templates) {
    GenConfig gc = cfg.gen;
    gc.jobs = jobs;
    const auto g0 = clock::now();
    GenerationResult corpus;
    try {
      corpus = generate(t.templ, gc);
    } catch (const GenerationError& e) {
      ++res.summary.generation_failures;
      res.summary.warnings.push_back(t.id + ": " + e.what());
      continue;
    }
    res.summary.generation_failures += corpus.failures;
    for (auto& w : corpus.warnings) res.summary.warnings.push_back(t.id + ": " + w);
    const auto g1 = clock::now();
    res.summary.generation_seconds += std::chrono::duration<double>(g1 - g0).count();

    std::vector<Verdict> verdicts(corpus.programs.size());
    auto test_range = [&](std::size_t begin) {
      for (std::size_t i = begin; i < verdicts.size(); i += jobs)
        verdicts[i] = diff_test(corpus.programs[i].program, std::span<const Backend* const>(raw), cfg.iters, opt);
    };
    if (jobs == 1) {
      test_range(0);
    } else {
      std::vector<std::future<void>> workers;
      for (unsigned j = 0; j < jobs; ++j) workers.push_back(std::async(std::launch::async, test_range, j));
      for (auto& w : workers) w.get();
    }
    res.summary.testing_seconds += std::chrono::duration<double>(clock::now() - g1).count();

    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      ++res.summary.programs;
      const Verdict& v = verdicts[i];
      switch (v.kind) {
      case Verdict::Kind::Agree: ++res.summary.agree; continue;
      case Verdict::Kind::Divergence: ++res.summary.divergence; break;
      case Verdict::Kind::Crash: ++res.summary.crash; break;
      case Verdict::Kind::NondetDiscard: ++res.summary.nondet_discard; break;
      }
      const auto& gp = corpus.programs[i];
      res.reports.push_back(BugReport{t.id, gp.index, cfg.gen.seed, cfg.backends, v, print(gp.program),
                                      repro_command(cfg, t.id, gp.index)});
    }
  }
  return res;
}

} // namespace templar
