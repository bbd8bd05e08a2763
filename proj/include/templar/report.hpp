#pragma once

// JSON forms of reports, summaries and configurations. Needs the single-header
// nlohmann/json (json.hpp) on the include path.

#include <cstdio>
#include "json.hpp"

#include "templar/difftest.hpp"

namespace templar {

inline std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json to_json(const Verdict& v, const std::vector<std::string>& backends = {}) {
  nlohmann::json j;
  j["verdict"] = to_string(v.kind);
  nlohmann::json sums = nlohmann::json::object();
  for (std::size_t i = 0; i < v.checksums.size(); ++i)
    sums[i < backends.size() ? backends[i] : std::to_string(i)] = hex64(v.checksums[i]);
  j["checksums"] = sums;
  switch (v.kind) {
  case Verdict::Kind::Agree: j["checksum"] = hex64(v.checksum); break;
  case Verdict::Kind::Divergence:
    j["backend_a"] = v.backend_a;
    j["checksum_a"] = hex64(v.checksum_a);
    j["backend_b"] = v.backend_b;
    j["checksum_b"] = hex64(v.checksum_b);
    break;
  case Verdict::Kind::Crash:
    j["backend"] = v.backend;
    if (v.crash) {
      j["crash"] = to_string(v.crash->kind);
      j["iteration"] = v.crash->iteration;
      j["message"] = v.crash->message;
    }
    break;
  case Verdict::Kind::NondetDiscard: j["backend"] = v.backend; break;
  }
  return j;
}

inline nlohmann::json to_json(const BugReport& r) {
  nlohmann::json j = to_json(r.verdict, r.backends);
  j["template"] = r.template_id;
  j["program_index"] = r.program_index;
  j["seed"] = r.seed;
  j["backends"] = r.backends;
  j["program"] = r.program_text;
  j["repro"] = r.repro;
  return j;
}

inline nlohmann::json to_json(const CampaignSummary& s) {
  return {{"programs", s.programs},
          {"agree", s.agree},
          {"divergence", s.divergence},
          {"crash", s.crash},
          {"nondet_discard", s.nondet_discard},
          {"generation_failures", s.generation_failures},
          {"warnings", s.warnings},
          {"generation_seconds", s.generation_seconds},
          {"testing_seconds", s.testing_seconds}};
}

inline OptimizationSet parse_optimizations(std::string_view text) {
  std::uint8_t bits = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view item = text.substr(pos, comma - pos);
    if (item == "none") {
    } else if (item == "all") {
      bits |= OptimizationSet::all().bits();
    } else if (item == "early-stop") {
      bits |= static_cast<std::uint8_t>(Optimization::EarlyStop);
    } else if (item == "hot-fill") {
      bits |= static_cast<std::uint8_t>(Optimization::HotFill);
    } else if (item == "eager-prune") {
      bits |= static_cast<std::uint8_t>(Optimization::EagerPrune);
    } else {
      throw Error("unknown optimization '" + std::string(item) + "'");
    }
    pos = comma + 1;
  }
  return OptimizationSet::from_bits(bits);
}

inline FaultSet parse_faults(std::string_view text) {
  FaultSet out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view item = text.substr(pos, comma - pos);
    auto f = parse_fault(item);
    if (!f) throw Error("unknown fault '" + std::string(item) + "'");
    out.insert(*f);
    pos = comma + 1;
  }
  return out;
}

inline nlohmann::json to_json(const GenConfig& c) {
  return {{"n", c.n},
          {"seed", c.seed},
          {"max_iterations", c.max_iterations},
          {"optimizations", to_string(c.optimizations)},
          {"per_program_timeout_ms", c.per_program_timeout.count()},
          {"overall_timeout_ms", c.overall_timeout.count()},
          {"step_budget", c.step_budget},
          {"max_stale_attempts", c.max_stale_attempts},
          {"jobs", c.jobs}};
}

inline GenConfig gen_config_from_json(const nlohmann::json& j) {
  GenConfig c;
  c.n = j.value("n", c.n);
  c.seed = j.value("seed", c.seed);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.optimizations = parse_optimizations(j.value("optimizations", std::string("all")));
  c.per_program_timeout = std::chrono::milliseconds(j.value("per_program_timeout_ms", c.per_program_timeout.count()));
  c.overall_timeout = std::chrono::milliseconds(j.value("overall_timeout_ms", c.overall_timeout.count()));
  c.step_budget = j.value("step_budget", c.step_budget);
  c.max_stale_attempts = j.value("max_stale_attempts", c.max_stale_attempts);
  c.jobs = j.value("jobs", c.jobs);
  return c;
}

} // namespace templar
