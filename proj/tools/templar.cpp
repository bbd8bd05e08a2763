// templar: generate programs from templates and differential-test backends.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "CLI11.hpp"
#include "templar/report.hpp"
#include "templar/templar.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace templar;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitReports = 1;
constexpr int kExitError = 2;
constexpr int kExitUnfilledHole = 3;
constexpr int kExitBudget = 4;

constexpr std::uint64_t kDefaultSeed = 0xA77ACC;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read '" + p.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Write-to-temp then rename, so readers never observe a partial file.
void write_atomic(const fs::path& p, std::string_view content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, p);
}

Program load_program(const fs::path& p) {
  try {
    return parse(read_file(p));
  } catch (const SourceError& e) {
    throw Error(p.string() + ":" + e.what());
  }
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

/// Expands directories to their *.tj files, sorted.
std::vector<std::string> expand_templates(const std::vector<std::string>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) {
    if (!fs::is_directory(p)) {
      out.push_back(p);
      continue;
    }
    std::vector<std::string> found;
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file() && e.path().extension() == ".tj") found.push_back(e.path().string());
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

/// `--seed` value: a number (decimal or 0x hex), `random`, or unset. Unset
/// falls back to TEMPLAR_SEED, then the built-in default.
std::uint64_t resolve_seed(const std::string& flag) {
  std::string text = flag;
  if (text.empty()) {
    const char* env = std::getenv("TEMPLAR_SEED");
    if (!env || !*env) return kDefaultSeed;
    text = env;
  }
  if (text == "random") {
    std::random_device rd;
    const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "seed: " << seed << "\n";
    return seed;
  }
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error("bad seed '" + text + "'");
  }
}

struct GenFlags {
  std::size_t n = 50;
  std::string seed;
  std::size_t max_iterations = GenConfig{}.max_iterations;
  std::string opt = "all";
  unsigned jobs = 1;

  void attach(CLI::App& app) {
    app.add_option("-n,--count", n, "Programs to generate")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Seed: integer, 0x-hex, or 'random' (default 0xA77ACC; env TEMPLAR_SEED)");
    app.add_option("--max-iterations", max_iterations, "Iteration limit per generated program")
        ->check(CLI::PositiveNumber);
    app.add_option("--opt", opt, "none|early-stop|hot-fill|eager-prune|all, comma-separable");
    app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  }

  GenConfig config() const {
    GenConfig c;
    c.n = n;
    c.seed = resolve_seed(seed);
    c.max_iterations = max_iterations;
    c.optimizations = parse_optimizations(opt);
    c.jobs = jobs;
    return c;
  }
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

// ---------------------------------------------------------------------------

struct GenCmd {
  std::string templ;
  std::string out = ".";
  bool static_fill = false;
  GenFlags gen;

  void attach(CLI::App& app) {
    app.add_option("-t,--template", templ, "Template file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "Output directory");
    app.add_flag("--static", static_fill, "Fill every hole without executing the template");
    gen.attach(app);
  }

  int run() const {
    const GenConfig cfg = gen.config();
    const Template t = load_program(templ);
    Generator g(t, cfg);
    const GenerationResult res = static_fill ? g.static_generate() : g.generate();
    print_warnings(res.warnings);
    json files = json::array();
    for (const auto& p : res.programs) {
      const std::string name = "gen-" + std::to_string(p.index) + ".tj";
      write_atomic(fs::path(out) / name, print(p.program));
      files.push_back({{"file", name},
                       {"index", p.index},
                       {"holes_filled", p.fills.size()},
                       {"iterations", p.stats.iterations},
                       {"early_stopped", p.stats.early_stopped}});
    }
    json manifest = {{"template", templ},
                     {"mode", static_fill ? "static" : "execution"},
                     {"config", to_json(cfg)},
                     {"programs", files},
                     {"attempts", res.attempts},
                     {"failures", res.failures},
                     {"warnings", res.warnings}};
    write_atomic(fs::path(out) / "manifest.json", manifest.dump(2) + "\n");
    std::cout << "generated " << res.programs.size() << " program(s) into " << out << "\n";
    return kExitOk;
  }
};

struct RunCmd {
  std::string program;
  std::string backend = "ref";
  std::size_t iters = 1;
  std::string inject;
  bool allow_holes = false;

  void attach(CLI::App& app) {
    app.add_option("program", program, "Program file")->required()->check(CLI::ExistingFile);
    app.add_option("--backend", backend, "ref, vm, or tiered:<threshold>:<optlevel>");
    app.add_option("--iters", iters, "Iterations");
    app.add_option("--inject", inject, "Faults for tiered backends, comma-separated");
    app.add_flag("--allow-holes", allow_holes, "Run even if the program contains holes");
  }

  int run() const {
    const Program p = load_program(program);
    if (!allow_holes && !is_hole_free(p))
      throw Error(program + " contains holes (pass --allow-holes to run it anyway)");
    const auto b = make_backend(backend, parse_faults(inject));
    const Trace t = b->run(p, iters);
    if (t.crash) {
      std::cout << "crash: " << to_string(t.crash->kind) << " in iteration " << t.crash->iteration << ": "
                << t.crash->message << "\n";
      return t.crash->kind == Crash::Kind::UnfilledHole ? kExitUnfilledHole : kExitBudget;
    }
    std::cout << hex64(trace_checksum(t)) << "\n";
    return kExitOk;
  }
};

struct DifftestCmd {
  std::string program;
  std::string templ;
  std::uint64_t index = 1;
  GenFlags gen;
  std::string backends = "ref,vm,tiered:100:1";
  std::size_t iters = 2000;
  std::string inject;
  std::size_t rechecks = 1;

  void attach(CLI::App& app) {
    auto* p = app.add_option("-p,--program", program, "Program file")->check(CLI::ExistingFile);
    auto* t = app.add_option("-t,--template", templ, "Template to regenerate the program from")
                  ->check(CLI::ExistingFile);
    p->excludes(t);
    app.add_option("--index", index, "Program index within the template's generation");
    gen.attach(app);
    app.add_option("--backends", backends, "Comma-separated backend specs");
    app.add_option("--iters", iters, "Iterations per backend");
    app.add_option("--inject", inject, "Faults for tiered backends, comma-separated");
    app.add_option("--rechecks", rechecks, "Reference reruns before a divergence is reported");
  }

  int run() const {
    if (program.empty() == templ.empty()) throw Error("give exactly one of --program or --template");
    Program p;
    if (!program.empty()) {
      p = load_program(program);
    } else {
      p = Generator(load_program(templ), gen.config()).run_template(index).program;
    }
    const auto specs = split(backends);
    const auto bs = make_backends(specs, parse_faults(inject));
    const Verdict v = diff_test(p, bs, iters, DiffOptions{rechecks, nullptr});
    std::cout << to_json(v, specs).dump() << "\n";
    return v.agree() ? kExitOk : kExitReports;
  }
};

struct CampaignCmd {
  std::vector<std::string> templates;
  std::string manifest;
  GenFlags gen;
  std::string backends = "ref,vm,tiered:100:1";
  std::size_t iters = 2000;
  std::string inject;
  std::size_t rechecks = 1;
  std::string out = "campaign-out";

  void attach(CLI::App& app) {
    app.add_option("-t,--template", templates, "Template files or directories")->check(CLI::ExistingPath);
    app.add_option("--manifest", manifest, "Rerun a campaign from its manifest.json")->check(CLI::ExistingFile);
    gen.attach(app);
    app.add_option("--backends", backends, "Comma-separated backend specs");
    app.add_option("--iters", iters, "Iterations per backend");
    app.add_option("--inject", inject, "Faults for tiered backends, comma-separated");
    app.add_option("--rechecks", rechecks, "Reference reruns before a divergence is reported");
    app.add_option("--out", out, "Output directory for reports.jsonl, summary.json, manifest.json");
  }

  int run() const {
    CampaignConfig cfg;
    std::vector<std::string> paths;
    if (!manifest.empty()) {
      const json m = json::parse(read_file(manifest));
      paths = m.at("templates").get<std::vector<std::string>>();
      cfg.gen = gen_config_from_json(m.at("config"));
      cfg.backends = m.at("backends").get<std::vector<std::string>>();
      cfg.iters = m.at("iters").get<std::size_t>();
      cfg.faults = parse_faults(m.value("faults", std::string()));
      cfg.rechecks = m.value("rechecks", std::size_t{1});
    } else {
      if (templates.empty()) throw Error("campaign needs --template or --manifest");
      paths = expand_templates(templates);
      cfg.gen = gen.config();
      cfg.backends = split(backends);
      cfg.iters = iters;
      cfg.faults = parse_faults(inject);
      cfg.rechecks = rechecks;
    }
    cfg.jobs = cfg.gen.jobs;
    std::vector<CampaignTemplate> ts;
    for (const auto& p : paths) ts.push_back({p, load_program(p)});

    const json m = {{"templates", paths},
                    {"config", to_json(cfg.gen)},
                    {"backends", cfg.backends},
                    {"iters", cfg.iters},
                    {"faults", to_string(cfg.faults)},
                    {"rechecks", cfg.rechecks},
                    {"out", out}};
    write_atomic(fs::path(out) / "manifest.json", m.dump(2) + "\n");

    const CampaignResult res = campaign(ts, cfg);
    std::string lines;
    for (const auto& r : res.reports) lines += to_json(r).dump() + "\n";
    write_atomic(fs::path(out) / "reports.jsonl", lines);
    write_atomic(fs::path(out) / "summary.json", to_json(res.summary).dump(2) + "\n");
    print_warnings(res.summary.warnings);
    const auto& s = res.summary;
    std::cout << "programs " << s.programs << ", agree " << s.agree << ", divergence " << s.divergence
              << ", crash " << s.crash << ", nondet-discard " << s.nondet_discard << "\n";
    return res.reports.empty() ? kExitOk : kExitReports;
  }
};

struct ExtractCmd {
  std::string input;
  std::string inputs;
  std::string out;
  std::size_t max_depth = 0;

  void attach(CLI::App& app) {
    app.add_option("--input", input, "Concrete program")->required()->check(CLI::ExistingFile);
    app.add_option("--inputs", inputs, "Declared variables to turn into input holes, comma-separated");
    app.add_option("--out", out, "Template file to write (default: stdout)");
    app.add_option("--max-depth", max_depth, "Cap on nested hole depth (0: unlimited)");
  }

  int run() const {
    ExtractionConfig cfg;
    cfg.input_vars = split(inputs);
    if (max_depth > 0) cfg.max_hole_depth = max_depth;
    const Extraction e = extract_template(load_program(input), cfg);
    const std::string text = print(e.templ);
    if (out.empty()) {
      std::cout << text;
    } else {
      write_atomic(out, text);
    }
    return kExitOk;
  }
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"templar: template-based program generation and differential testing"};
  app.require_subcommand(1);
  GenCmd gen;
  RunCmd run;
  DifftestCmd diff;
  CampaignCmd camp;
  ExtractCmd ext;
  gen.attach(*app.add_subcommand("gen", "Generate programs from a template"));
  run.attach(*app.add_subcommand("run", "Run a program and print its checksum"));
  diff.attach(*app.add_subcommand("difftest", "Compare one program across backends"));
  camp.attach(*app.add_subcommand("campaign", "Generate and differential-test corpora"));
  ext.attach(*app.add_subcommand("extract", "Turn a concrete program into a template"));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (app.got_subcommand("gen")) return gen.run();
    if (app.got_subcommand("run")) return run.run();
    if (app.got_subcommand("difftest")) return diff.run();
    if (app.got_subcommand("campaign")) return camp.run();
    if (app.got_subcommand("extract")) return ext.run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
