// Command-line entry point: run, check, compare and replay scenarios.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ezbft/harness.hpp"

namespace fs = std::filesystem;
using namespace ezbft;
using namespace ezbft::harness;

namespace {

constexpr int kOk = 0;
constexpr int kParse = 2;
constexpr int kInvalid = 3;
constexpr int kViolation = 4;

fs::path scenario_dir() {
  if (const char* env = std::getenv("EZBFT_SCENARIOS")) return env;
  return EZBFT_SCENARIO_DIR;
}

/// A path to a scenario file, or the name of a bundled one.
std::string resolve(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  auto bundled = scenario_dir() / (arg + ".scn");
  if (fs::exists(bundled)) return bundled.string();
  return arg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(ScenarioError::Kind::parse, path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

struct Flags {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<double> time_limit;
  bool strict = false;
  std::string trace;
  std::string digest;
};

RunOptions options(const Flags& f) { return RunOptions{f.seed, f.time_limit}; }

void print_summary(const RunResult& r) {
  const auto& m = r.metrics;
  std::cout << "scenario " << r.scenario.name << " seed " << r.scenario.seed
            << (r.out_of_model ? " (out-of-model)" : "") << "\n";
  std::cout << "submitted " << m.submitted << " delivered " << m.delivered << " undelivered "
            << m.undelivered << " fast_ratio " << m.fast_ratio << " owner_changes "
            << m.owner_changes << " rollbacks " << m.rollbacks << "\n";
  for (const auto& reg : m.regions)
    std::cout << "  " << reg.region << ": n=" << reg.count << " mean=" << reg.mean_ms
              << "ms median=" << reg.median_ms << "ms p99=" << reg.p99_ms << "ms\n";
  std::cout << "trace sha256 " << r.trace_digest_hex() << "\n";
}

int report_invariants(const InvariantMonitor& m, bool out_of_model, bool strict) {
  for (const char* p : {"nontriviality", "consistency", "stability", "liveness"}) {
    const auto* v = m.first(p);
    std::cout << (v ? "FAIL " : "ok   ") << p;
    if (v) std::cout << ": " << v->message << "\n       at: " << v->line;
    std::cout << "\n";
  }
  if (m.ok()) return kOk;
  if (out_of_model && !strict) {
    std::cout << "violations tolerated: more than f faulty replicas (use --strict to fail)\n";
    return kOk;
  }
  return kViolation;
}

void write_outputs(const Flags& f, const RunResult& r) {
  if (f.out_dir.empty()) return;
  const fs::path dir(f.out_dir);
  const std::string stem = r.scenario.name + "-s" + std::to_string(r.scenario.seed);
  write_file(dir / (stem + ".trace"), r.trace());
  write_file(dir / (stem + ".metrics.jsonl"), r.metrics.to_jsonl());
  std::cout << "wrote " << (dir / stem).string() << ".{trace,metrics.jsonl}\n";
}

int cmd_run(const Flags& f) {
  auto s = load_scenario(resolve(f.scenario));
  auto r = run_scenario(s, options(f));
  print_summary(r);
  write_outputs(f, r);
  return report_invariants(r.monitor, r.out_of_model, f.strict);
}

int cmd_check(const Flags& f) {
  if (!f.trace.empty()) {
    const auto text = read_file(f.trace);
    auto m = check_trace(text);
    return report_invariants(m, text.find("# out_of_model=1") != std::string::npos, f.strict);
  }
  auto r = run_scenario(load_scenario(resolve(f.scenario)), options(f));
  write_outputs(f, r);
  return report_invariants(r.monitor, r.out_of_model, f.strict);
}

int cmd_compare(const Flags& f) {
  auto s = load_scenario(resolve(f.scenario));
  if (!s.faults.empty())
    throw ScenarioError(ScenarioError::Kind::invalid, "compare needs a fault-free scenario");
  auto r = run_scenario(s, options(f));
  std::cout << format_compare(compare(r.scenario, r.metrics), s.compare_primary.value_or(0), s);
  write_outputs(f, r);
  return kOk;
}

/// Re-runs the scenario named in a saved trace (or given explicitly) and
/// compares digests; with --out-dir the fresh trace is kept for diffing.
int cmd_replay(Flags f) {
  std::string expected = f.digest;
  if (!f.trace.empty()) {
    const auto text = read_file(f.trace);
    expected = crypto::digest(text).hex();
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("# scenario=", 0) != 0) continue;
      std::istringstream fields(line.substr(2));
      std::string field;
      while (fields >> field) {
        if (field.rfind("scenario=", 0) == 0 && f.scenario.empty()) f.scenario = field.substr(9);
        if (field.rfind("seed=", 0) == 0 && !f.seed) f.seed = std::stoull(field.substr(5));
      }
    }
  }
  if (f.scenario.empty())
    throw ScenarioError(ScenarioError::Kind::parse, "replay needs --scenario or --trace");
  auto r = run_scenario(load_scenario(resolve(f.scenario)), options(f));
  write_outputs(f, r);
  const auto actual = r.trace_digest_hex();
  std::cout << "digest " << actual << "\n";
  if (expected.empty()) return kOk;
  if (actual == expected) {
    std::cout << "replay matches\n";
    return kOk;
  }
  std::cout << "replay DIVERGES from " << expected << "\n";
  return kViolation;
}

int cmd_list() {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(scenario_dir()))
    if (e.path().extension() == ".scn") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    std::ifstream in(p);
    std::string first;
    std::getline(in, first);
    if (first.rfind("; ", 0) == 0)
      first = first.substr(2);
    else
      first.clear();
    std::cout << p.stem().string() << (first.empty() ? "" : "  " + first) << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ezbft: leaderless BFT replication in a deterministic simulator"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub, bool need_scenario) {
    auto* opt = sub->add_option("--scenario", f.scenario, "scenario file or bundled name");
    if (need_scenario) opt->required();
    sub->add_option("--seed", f.seed, "override the scenario seed");
    sub->add_option("--out-dir", f.out_dir, "write trace and metrics here");
    sub->add_option("--time-limit", f.time_limit, "simulated time limit in ms");
    sub->add_flag("--strict", f.strict, "treat every invariant violation as fatal");
  };
  auto* run = app.add_subcommand("run", "run a scenario and check invariants");
  common(run, true);
  auto* check = app.add_subcommand("check", "check invariants of a scenario run or saved trace");
  common(check, false);
  check->add_option("--trace", f.trace, "saved trace file");
  auto* cmp = app.add_subcommand("compare", "compare simulated latency with a primary-based model");
  common(cmp, true);
  auto* replay = app.add_subcommand("replay", "re-run and compare against a trace digest");
  common(replay, false);
  replay->add_option("--trace", f.trace, "saved trace; its header names scenario and seed");
  replay->add_option("--digest", f.digest, "expected sha256 hex digest");
  auto* list = app.add_subcommand("list-scenarios", "list bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kParse;
  }

  try {
    if (*run) return cmd_run(f);
    if (*check) {
      if (f.scenario.empty() == f.trace.empty()) {
        std::cerr << "check needs exactly one of --scenario or --trace\n";
        return kParse;
      }
      return cmd_check(f);
    }
    if (*cmp) return cmd_compare(f);
    if (*replay) return cmd_replay(f);
    if (*list) return cmd_list();
  } catch (const ScenarioError& e) {
    std::cerr << (e.kind == ScenarioError::Kind::parse ? "parse error: " : "invalid scenario: ")
              << e.what() << "\n";
    return e.kind == ScenarioError::Kind::parse ? kParse : kInvalid;
  }
  return kOk;
}
