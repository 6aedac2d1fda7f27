#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "scenario_util.hpp"

using namespace ezbft;
using namespace ezbft::harness;

namespace {

const char* kMinimal = R"(
[scenario]
n = 4
f = 1
seed = 9

[latency]
r0 = 0, 1, 2, 3
r1 = 1, 0, 1, 2
r2 = 2, 1, 0, 1
r3 = 3, 2, 1, 0

[client.0]
home = 2
requests = 3
)";

ScenarioError::Kind error_kind(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e.kind;
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return ScenarioError::Kind::parse;
}

}  // namespace

TEST(ScenarioParse, Minimal) {
  auto s = parse_scenario(kMinimal);
  EXPECT_EQ(s.n, 4u);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.latency_ms[0][3], 3);
  ASSERT_EQ(s.clients.size(), 1u);
  EXPECT_EQ(s.clients[0].home, 2u);
  EXPECT_EQ(s.clients[0].region, 2u);  // defaults to home
  EXPECT_EQ(s.checkpoint_interval, 128u);
}

TEST(ScenarioParse, FullGrammar) {
  std::string text = std::string(kMinimal) + R"(
[timers]
slow_ms = 50
owner_change_ms = 900

[slow_quorum]
r1 = R0, R1, R2

[client.1]
home = 0
region = 1
offset_ms = 2.5
commands = put x 1; get x; inc y 3

[fault.0]
target = R3
behavior = mute
from_ms = 10
until_ms = 20

[fault.1]
target = C1
behavior = delay
extra_ms = 4

[compare]
primary = 1
)";
  auto s = parse_scenario(text);
  EXPECT_EQ(*s.timers.slow_ms, 50);
  EXPECT_EQ(s.timers.owner_change_ms, 900);
  EXPECT_EQ(s.slow_quorums[1], (std::vector<ReplicaIndex>{0, 1, 2}));
  ASSERT_EQ(s.clients.size(), 2u);
  EXPECT_EQ(s.clients[1].commands.size(), 3u);
  EXPECT_EQ(s.clients[1].commands[2], Command::increment("y", 3));
  EXPECT_EQ(s.clients[1].requests, 3u);
  ASSERT_EQ(s.faults.size(), 2u);
  EXPECT_EQ(s.faults[0].behavior, Behavior::mute);
  EXPECT_EQ(s.faults[1].target, NodeId::client(1));
  EXPECT_EQ(s.faulty_replicas(), (std::set<ReplicaIndex>{3}));
  EXPECT_EQ(*s.compare_primary, 1u);
}

TEST(ScenarioParse, SyntaxAndTypeErrorsAreParseErrors) {
  const std::string base(kMinimal);
  EXPECT_EQ(error_kind(base + "[scenario\n"), ScenarioError::Kind::parse);
  EXPECT_EQ(error_kind(base + "[client.1]\nhome = one\n"), ScenarioError::Kind::parse);
  EXPECT_EQ(error_kind(base + "[client.1]\nhomme = 1\n"), ScenarioError::Kind::parse);
  EXPECT_EQ(error_kind(base + "[mystery]\nx = 1\n"), ScenarioError::Kind::parse);
  EXPECT_EQ(error_kind(base + "[fault.0]\ntarget = R1\nbehavior = explode\n"),
            ScenarioError::Kind::parse);
  EXPECT_EQ(error_kind(base + "[client.1]\ncommands = put x\n"), ScenarioError::Kind::parse);
}

TEST(ScenarioParse, SemanticErrorsAreInvalid) {
  std::string s(kMinimal);
  auto replace = [&](const std::string& from, const std::string& to) {
    auto copy = s;
    copy.replace(copy.find(from), from.size(), to);
    return copy;
  };
  EXPECT_EQ(error_kind(replace("n = 4", "n = 5")), ScenarioError::Kind::invalid);
  EXPECT_EQ(error_kind(replace("r3 = 3, 2, 1, 0", "r3 = 3, 2, 1")), ScenarioError::Kind::invalid);
  EXPECT_EQ(error_kind(replace("r1 = 1, 0, 1, 2", "r1 = 1, 0, -1, 2")), ScenarioError::Kind::invalid);
  EXPECT_EQ(error_kind(replace("home = 2", "home = 4")), ScenarioError::Kind::invalid);
  EXPECT_EQ(error_kind(s + "[slow_quorum]\nr0 = 1, 2, 3\n"), ScenarioError::Kind::invalid);
  EXPECT_EQ(error_kind(s + "[client.1]\nconflict_rate = 1.5\n"), ScenarioError::Kind::invalid);
  const std::string two_faulty = s +
                                 "[fault.0]\ntarget = R1\nbehavior = crash\n"
                                 "[fault.1]\ntarget = R2\nbehavior = mute\n";
  EXPECT_EQ(error_kind(two_faulty), ScenarioError::Kind::invalid);
  auto allowed = two_faulty;
  allowed.replace(allowed.find("seed = 9"), 8, "seed = 9\nallow_out_of_model = true");
  auto parsed = parse_scenario(allowed);
  EXPECT_TRUE(parsed.out_of_model());
}

TEST(ScenarioParse, BundledScenariosLoad) {
  for (const char* name : {"fig1_fastpath", "fig2_conflict", "fig3_lying_r2", "four_region",
                           "four_region_contention", "equivocate", "mute_leader", "mute_nonleader",
                           "lie_deps", "crash", "partition_heal"}) {
    auto s = load_scenario(std::string(EZBFT_SCENARIO_DIR) + "/" + name + ".scn");
    EXPECT_EQ(s.name, name);
  }
}

TEST(Workload, DeterministicAndMonotoneInConflictRate) {
  auto s = parse_scenario(kMinimal);
  s.clients[0].requests = 200;
  s.clients[0].key_space = 8;
  EXPECT_EQ(workload(s, 0), workload(s, 0));
  std::size_t previous = 0;
  std::vector<bool> hot_before(200, false);
  for (double rate : {0.0, 0.02, 0.5, 1.0}) {
    s.clients[0].conflict_rate = rate;
    auto cmds = workload(s, 0);
    std::size_t hot = 0;
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      const bool is_hot = cmds[i].key == "hot";
      if (hot_before[i]) {
        EXPECT_TRUE(is_hot) << "rate " << rate << " index " << i;
      }
      hot_before[i] = is_hot;
      hot += is_hot;
      if (!is_hot) {
        EXPECT_EQ(cmds[i].key.rfind("c0k", 0), 0u);
      }
    }
    EXPECT_GE(hot, previous);
    previous = hot;
  }
  EXPECT_EQ(previous, 200u);
}

TEST(Monitor, FlagsEachProperty) {
  InvariantMonitor m({NodeId::replica(3)});
  m.feed("# header");
  m.feed("0 submit C0 - - - t=1 cmd=put:x:1 target=R0");
  m.feed("0 deliver C0 - - R0.0 t=1 rep=- path=fast steps=3 latency=40");
  m.feed("1 final R0 - - R0.0 c=C0 t=1 cmd=put:x:1 rep=- dup=0");
  m.feed("2 final R1 - - R0.0 c=C0 t=1 cmd=put:x:1 rep=- dup=0");
  m.feed("3 final R3 - - R0.0 c=C9 t=1 cmd=get:x rep=- dup=0");  // faulty: ignored
  EXPECT_TRUE(m.ok());

  m.feed("4 final R2 - - R0.0 c=C0 t=2 cmd=put:x:1 rep=- dup=0");
  ASSERT_NE(m.first("nontriviality"), nullptr);
  ASSERT_NE(m.first("consistency"), nullptr);
  EXPECT_EQ(m.first("consistency")->line.substr(0, 8), "4 final ");

  m.feed("5 commit R1 - - R1.0 c=C0 t=1 cmd=put:x:1 deps={} seq=1 path=fast");
  m.feed("6 commit R1 - - R1.0 c=C0 t=1 cmd=put:x:1 deps={} seq=1 path=fast");
  EXPECT_EQ(m.first("stability"), nullptr);
  m.feed("7 void R1 - - R1.0 c=C0 t=1 cmd=put:x:1");
  ASSERT_NE(m.first("stability"), nullptr);

  m.feed("8 submit C1 - - - t=1 cmd=get:x target=R2");
  m.finish();
  ASSERT_NE(m.first("liveness"), nullptr);
  EXPECT_EQ(m.first("liveness")->line, "8 submit C1 - - - t=1 cmd=get:x target=R2");
}

TEST(Monitor, SavedTraceReplays) {
  auto s = load_scenario(std::string(EZBFT_SCENARIO_DIR) + "/fig3_lying_r2.scn");
  auto r = run_scenario(s);
  auto m = check_trace(r.trace());
  EXPECT_TRUE(m.ok());
  // Dropping the faulty list from the header exposes nothing: R2 lies only in replies.
  EXPECT_NE(r.trace().find("# faulty=R2"), std::string::npos);
}

TEST(Metrics, ConservationAndJson) {
  auto s = fixture::uniform(10);
  s.clients.push_back(fixture::client(0, {Command::put("x", 1), Command::put("x", 2)}));
  s.clients.push_back(fixture::client(1, {Command::get("x")}));
  s.time_limit_ms = 15;  // too short for anything to finish
  auto cut = run_scenario(s);
  EXPECT_EQ(cut.metrics.delivered, 0u);
  EXPECT_EQ(cut.metrics.submitted, 2u);
  EXPECT_EQ(cut.metrics.undelivered, 2u);
  EXPECT_NE(cut.monitor.first("liveness"), nullptr);

  s.time_limit_ms = 10'000;
  auto r = run_scenario(s);
  const auto& m = r.metrics;
  EXPECT_EQ(m.delivered, m.submitted - m.undelivered);
  EXPECT_EQ(m.commands.size(), m.delivered);
  EXPECT_GE(m.fast_ratio, 0.0);
  EXPECT_LE(m.fast_ratio, 1.0);
  std::istringstream in(m.to_jsonl());
  std::string line;
  std::size_t commands = 0;
  nlohmann::json summary;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    if (j["type"] == "command") ++commands;
    else summary = j;
  }
  EXPECT_EQ(commands, 3u);
  EXPECT_EQ(summary["delivered"], 3);
  EXPECT_EQ(summary["undelivered"], 0);
  EXPECT_EQ(summary["regions"].size(), 2u);
}

TEST(LatencyModel, SymmetricMatrix) {
  auto s = fixture::uniform(30);
  EXPECT_DOUBLE_EQ(ezbft_fast_latency(s, 1, 1), 60);   // 2 delta
  EXPECT_DOUBLE_EQ(primary_latency(s, 1, 0), 90);      // delta' + 2 delta
  EXPECT_DOUBLE_EQ(primary_latency(s, 0, 0), 60);
}

TEST(LatencyModel, FourRegionTable) {
  auto s = load_scenario(std::string(EZBFT_SCENARIO_DIR) + "/four_region.scn");
  // Hand-computed from the bundled matrix with the primary at VA.
  const std::map<std::string, std::pair<double, double>> expected{
      {"VA", {198, 198}}, {"JP", {160, 235}}, {"IN", {190, 269}}, {"AU", {198, 269}}};
  for (const auto& row : compare(s, MetricsReport{})) {
    auto [ez, primary] = expected.at(row.region);
    EXPECT_DOUBLE_EQ(row.ezbft_model_ms, ez) << row.region;
    EXPECT_DOUBLE_EQ(row.primary_ms, primary) << row.region;
    EXPECT_TRUE(std::isnan(row.ezbft_sim_ms));
  }
}

TEST(LatencyModel, LeaderlessNeverWorseOnMetricLatencies) {
  // Delays from points in the plane obey the triangle inequality, which is
  // what makes 2 max_j d(r,j) <= d(r,p) + max_j (d(p,j) + d(j,r)).
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> coord(0, 100);
  for (int round = 0; round < 300; ++round) {
    auto s = fixture::uniform(0);
    std::vector<std::pair<double, double>> at(4);
    for (auto& p : at) p = {coord(rng), coord(rng)};
    for (std::uint32_t i = 0; i < 4; ++i)
      for (std::uint32_t j = 0; j < 4; ++j)
        s.latency_ms[i][j] = std::hypot(at[i].first - at[j].first, at[i].second - at[j].second);
    for (ReplicaIndex r = 0; r < 4; ++r)
      for (ReplicaIndex p = 0; p < 4; ++p)
        EXPECT_LE(ezbft_fast_latency(s, r, r), primary_latency(s, r, p) + 1e-9);
  }
}
