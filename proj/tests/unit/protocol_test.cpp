#include <gtest/gtest.h>

#include "scenario_util.hpp"

using namespace ezbft;
using namespace ezbft::harness;
using fixture::client;
using fixture::count_lines;
using fixture::uniform;

namespace {

const Replica& at(const RunResult& r, ReplicaIndex i) { return *r.replicas.at(i); }

void expect_all_final_equal(const RunResult& r) {
  const Replica* ref = nullptr;
  for (ReplicaIndex i = 0; i < r.replicas.size(); ++i) {
    if (!r.correct(i)) continue;
    if (!ref) {
      ref = r.replicas[i];
      continue;
    }
    EXPECT_EQ(r.replicas[i]->engine().state().final_state(), ref->engine().state().final_state())
        << "R" << i;
  }
}

}  // namespace

TEST(FastPath, SingleCommandMessagePattern) {
  auto s = uniform(20);
  s.clients.push_back(client(0, {Command::put("x", 1)}));
  auto r = run_scenario(s);
  ASSERT_TRUE(r.monitor.ok());
  const auto& kinds = r.sim->stats().sent_by_kind;
  EXPECT_EQ(kinds.at("Request"), 1u);
  EXPECT_EQ(kinds.at("SpecOrder"), 3u);
  EXPECT_EQ(kinds.at("SpecReply"), 4u);
  EXPECT_EQ(kinds.at("CommitFast"), 4u);
  EXPECT_EQ(kinds.count("Commit"), 0u);
  ASSERT_EQ(r.metrics.commands.size(), 1u);
  EXPECT_EQ(r.metrics.commands[0].steps, 3);
  EXPECT_EQ(r.metrics.commands[0].path, CommitPath::fast);
  EXPECT_EQ(r.metrics.commands[0].delivered - r.metrics.commands[0].submitted, 40 * kMillisecond);
  for (ReplicaIndex i = 0; i < 4; ++i) {
    EXPECT_TRUE(at(r, i).engine().is_final({0, 0}));
    EXPECT_EQ(at(r, i).engine().state().final_state().at("x"), 1);
  }
}

TEST(FastPath, SpeculativeRepliesCarryState) {
  auto s = uniform(10);
  s.clients.push_back(client(1, {Command::put("k", 5), Command::get("k"), Command::increment("k", 2),
                                 Command::get("k")}));
  auto r = run_scenario(s);
  const auto& d = r.clients[0]->deliveries();
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d[1].reply, 5);
  EXPECT_EQ(d[3].reply, 7);
  for (const auto& x : d) EXPECT_EQ(x.path, CommitPath::fast);
  // One space, consecutive slots; each later command depends on the earlier ones.
  EXPECT_EQ(d[3].instance, (InstanceId{1, 3}));
  EXPECT_EQ(at(r, 2).space(1).slots.at(3).deps, (DepSet{{1, 0}, {1, 2}}));
}

TEST(SlowPath, ConcurrentConflictTakesTwoMoreSteps) {
  auto s = uniform(30);
  s.clients.push_back(client(0, {Command::put("x", 1)}));
  s.clients.push_back(client(2, {Command::put("x", 2)}));
  auto r = run_scenario(s);
  ASSERT_TRUE(r.monitor.ok());
  for (const auto& c : r.metrics.commands) {
    EXPECT_EQ(c.path, CommitPath::slow);
    EXPECT_EQ(c.steps, 5);
  }
  expect_all_final_equal(r);
  // Both orders see each other; the cycle resolves identically everywhere.
  const auto& order = at(r, 1).engine().final_order();
  for (ReplicaIndex i = 0; i < 4; ++i) EXPECT_EQ(at(r, i).engine().final_order(), order);
}

TEST(Retransmission, MutedHomeLeadsToOwnerChange) {
  auto s = uniform(10);
  s.clients.push_back(client(0, {Command::put("x", 1)}));
  FaultSpec mute;
  mute.target = NodeId::replica(0);
  mute.behavior = Behavior::mute;
  s.faults.push_back(mute);
  auto r = run_scenario(s);
  EXPECT_TRUE(r.monitor.ok());
  EXPECT_EQ(r.metrics.delivered, 1u);
  EXPECT_GE(r.clients[0]->retransmissions(), 1u);
  const auto& trace = r.trace();
  EXPECT_GT(count_lines(trace, " ResendReq "), 0u);
  EXPECT_GT(count_lines(trace, " StartOwnerChange "), 0u);
  EXPECT_GT(count_lines(trace, " NewOwner "), 0u);
  for (ReplicaIndex i = 1; i < 4; ++i) {
    EXPECT_TRUE(at(r, i).space(0).frozen);
    EXPECT_EQ(at(r, i).space(0).owner.value, 1u);
  }
}

TEST(Equivocation, PomFreezesSpaceAndKeepsCommitted) {
  auto s = uniform(10);
  s.jitter_ms = 1;
  s.clients.push_back(client(0, {Command::put("x", 1), Command::put("y", 2)}));
  s.clients.push_back(client(1, {Command::put("x", 3)}, 5));
  FaultSpec eq;
  eq.target = NodeId::replica(0);
  eq.behavior = Behavior::equivocate;
  s.faults.push_back(eq);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto r = run_scenario(s, {seed, std::nullopt});
    EXPECT_TRUE(r.monitor.ok()) << "seed " << seed << ": " << r.monitor.violations()[0].message;
    EXPECT_EQ(r.clients[0]->poms_sent(), 1u);
    ASSERT_FALSE(r.clients[0]->poms().empty());
    EXPECT_TRUE(at(r, 1).verifier().pom(r.clients[0]->poms()[0]));
    for (ReplicaIndex i = 1; i < 4; ++i) {
      EXPECT_TRUE(at(r, i).space(0).frozen) << "seed " << seed;
      EXPECT_EQ(at(r, i).space(0).owner.value, 1u);
    }
    EXPECT_EQ(r.metrics.undelivered, 0u);
    expect_all_final_equal(r);
  }
}

TEST(LyingParticipant, HiddenDependencyIsRecoveredByTheQuorum) {
  auto s = load_scenario(std::string(EZBFT_SCENARIO_DIR) + "/fig3_lying_r2.scn");
  auto r = run_scenario(s);
  ASSERT_TRUE(r.monitor.ok());
  expect_all_final_equal(r);
  EXPECT_GT(count_lines(r.trace(), " lie R2 "), 0u);
}

TEST(Crash, ClientOfCrashedReplicaStillDelivers) {
  auto s = uniform(10);
  s.clients.push_back(client(3, {Command::put("a", 1), Command::put("a", 2), Command::get("a")}));
  s.clients.push_back(client(0, {Command::put("a", 3)}, 30));
  FaultSpec crash;
  crash.target = NodeId::replica(3);
  crash.behavior = Behavior::crash;
  crash.at_ms = 25;
  s.faults.push_back(crash);
  auto r = run_scenario(s);
  EXPECT_TRUE(r.monitor.ok());
  EXPECT_EQ(r.metrics.undelivered, 0u);
  EXPECT_EQ(r.metrics.delivered, 4u);
  expect_all_final_equal(r);
}

namespace {

Scenario muted_after_three(std::uint32_t quorum) {
  auto s = uniform(10);
  s.checkpoint_interval = 2;
  s.owner_change_quorum = quorum;
  s.clients.push_back(client(0, {Command::put("x", 1), Command::put("x", 2), Command::put("x", 3),
                                 Command::get("x")}));
  FaultSpec mute;
  mute.target = NodeId::replica(0);
  mute.behavior = Behavior::mute;
  mute.from_ms = 50;
  s.faults.push_back(mute);
  return s;
}

}  // namespace

TEST(OwnerChange, SmallCheckpointInterval) {
  auto r = run_scenario(muted_after_three(0));
  EXPECT_TRUE(r.monitor.ok());
  EXPECT_EQ(r.metrics.undelivered, 0u);
  EXPECT_EQ(r.clients[0]->deliveries().back().reply, 3);
  EXPECT_EQ(r.metrics.owner_changes, 1u);
}

TEST(OwnerChange, QuorumOfAllStallsWhileOneReplicaIsSilent) {
  auto r = run_scenario(muted_after_three(4));
  EXPECT_EQ(r.metrics.owner_changes, 0u);
  EXPECT_EQ(r.metrics.undelivered, 1u);
  ASSERT_NE(r.monitor.first("liveness"), nullptr);
  EXPECT_EQ(r.monitor.violations().size(), 1u);
}

TEST(Determinism, RepeatedRunsMatch) {
  auto s = load_scenario(std::string(EZBFT_SCENARIO_DIR) + "/equivocate.scn");
  auto a = run_scenario(s), b = run_scenario(s);
  EXPECT_EQ(a.trace(), b.trace());
  auto c = run_scenario(s, {s.seed + 1, std::nullopt});
  EXPECT_NE(a.trace_digest_hex(), c.trace_digest_hex());
}

TEST(Signatures, Ed25519RunMatchesKeyedOutcome) {
  auto s = load_scenario(std::string(EZBFT_SCENARIO_DIR) + "/fig2_conflict.scn");
  auto keyed = run_scenario(s);
  s.signatures = "ed25519";
  auto ed = run_scenario(s);
  ASSERT_TRUE(ed.monitor.ok());
  EXPECT_EQ(ed.replicas[0]->engine().final_order(), keyed.replicas[0]->engine().final_order());
  EXPECT_EQ(ed.replicas[0]->engine().state().final_state(),
            keyed.replicas[0]->engine().state().final_state());
}
