#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"

using namespace ezbft;
using fixture::Cluster;

namespace {

// Reference combine built from plain vectors.
std::pair<std::vector<InstanceId>, std::uint64_t> combine_oracle(
    const std::vector<SpecReplyMsg>& replies) {
  std::vector<InstanceId> all;
  std::uint64_t seq = 1;
  for (const auto& r : replies) {
    for (const auto& d : r.deps) all.push_back(d);
    if (r.seq.value > seq) seq = r.seq.value;
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return {all, seq};
}

}  // namespace

TEST(Combine, UnionAndMaximum) {
  Cluster c;
  auto req = c.request(0, 1, Command::put("x", 1));
  auto o = c.order(req, {0, 0}, {}, 1);
  std::vector<SpecReplyMsg> rs{c.reply(0, o, req, {}, 1), c.reply(1, o, req, {{3, 0}}, 2),
                               c.reply(2, o, req, {{3, 0}, {2, 1}}, 3)};
  auto [deps, seq] = combine(rs);
  EXPECT_EQ(deps, (DepSet{{2, 1}, {3, 0}}));
  EXPECT_EQ(seq.value, 3u);
}

TEST(Combine, MatchesOracleOnRandomReplySets) {
  Cluster c;
  std::mt19937_64 rng(17);
  auto req = c.request(0, 1, Command::put("x", 1));
  auto o = c.order(req, {0, 0}, {}, 1);
  for (int round = 0; round < 500; ++round) {
    std::vector<SpecReplyMsg> rs;
    for (ReplicaIndex s = 0; s < 3; ++s) {
      DepSet d;
      for (auto k = rng() % 4; k > 0; --k) d.insert({static_cast<ReplicaIndex>(rng() % 4), rng() % 5});
      rs.push_back(c.reply(s, o, req, d, 1 + rng() % 6));
    }
    auto [deps, seq] = combine(rs);
    auto [odeps, oseq] = combine_oracle(rs);
    EXPECT_EQ(std::vector<InstanceId>(deps.begin(), deps.end()), odeps);
    EXPECT_EQ(seq.value, oseq);
  }
}

TEST(MatchSpecReplies, SevenFields) {
  Cluster c;
  auto req = c.request(0, 1, Command::put("x", 1));
  auto o = c.order(req, {0, 0}, {}, 1);
  auto a = c.reply(0, o, req, {}, 1, 4);
  auto b = c.reply(1, o, req, {}, 1, 4);
  EXPECT_TRUE(match_spec_replies(a, b));
  EXPECT_FALSE(match_spec_replies(a, c.reply(1, o, req, {{1, 0}}, 1, 4)));
  EXPECT_FALSE(match_spec_replies(a, c.reply(1, o, req, {}, 2, 4)));
  EXPECT_FALSE(match_spec_replies(a, c.reply(1, o, req, {}, 1, 5)));
}

TEST(Verifier, SpecOrderSignedByOwner) {
  Cluster c;
  auto v = c.verifier();
  auto req = c.request(0, 1, Command::put("x", 1));
  auto o = c.order(req, {1, 0}, {}, 1);
  EXPECT_TRUE(v.spec_order(SpecOrderMsg{o, req}));
  auto forged = o;
  forged.sig = c.registry->scheme().sign(c.replicas[2], signing_payload(forged));
  EXPECT_FALSE(v.spec_order(forged));
  auto self_dep = c.order(req, {1, 0}, {{1, 0}}, 1);
  EXPECT_FALSE(v.spec_order(self_dep));
  auto other = c.request(0, 2, Command::put("x", 1));
  EXPECT_FALSE(v.spec_order(SpecOrderMsg{o, other}));  // digest mismatch
  // After an owner change the space is ordered by (O mod N).
  auto moved = c.order(req, {1, 1}, {}, 1, OwnerNumber{2});
  EXPECT_TRUE(v.spec_order(moved));
}

TEST(Verifier, SpecReplyBindsOrder) {
  Cluster c;
  auto v = c.verifier();
  auto req = c.request(0, 1, Command::put("x", 1));
  auto o = c.order(req, {0, 0}, {}, 1);
  auto r = c.reply(2, o, req, {}, 1);
  EXPECT_TRUE(v.spec_reply(r));
  auto wrong_sender = r;
  wrong_sender.sender = 1;
  EXPECT_FALSE(v.spec_reply(wrong_sender));
  auto other_order = c.reply(2, c.order(req, {0, 1}, {}, 1), req, {}, 1);
  other_order.order = o;
  EXPECT_FALSE(v.spec_reply(other_order));
}

TEST(Verifier, FastCertificateNeedsAllMatching) {
  Cluster c;
  auto v = c.verifier();
  auto req = c.request(0, 1, Command::put("x", 1));
  auto o = c.order(req, {0, 0}, {}, 1);
  CommitCertificate cc{CertKind::fast, c.matching(o, req, {0, 1, 2, 3})};
  EXPECT_TRUE(v.fast_certificate(cc, {0, 0}));
  EXPECT_FALSE(v.fast_certificate(cc, {0, 1}));
  auto three = cc;
  three.replies.pop_back();
  EXPECT_FALSE(v.fast_certificate(three, {0, 0}));
  auto dup = cc;
  dup.replies[3] = dup.replies[0];
  EXPECT_FALSE(v.fast_certificate(dup, {0, 0}));
  auto mismatch = cc;
  mismatch.replies[3] = c.reply(3, o, req, {{2, 0}}, 2);
  EXPECT_FALSE(v.fast_certificate(mismatch, {0, 0}));
  EXPECT_TRUE(v.commit_fast(CommitFastMsg{req.client, {0, 0}, cc}));
}

TEST(Verifier, SlowCommitChecksCombination) {
  Cluster c;
  auto v = c.verifier();
  auto req = c.request(0, 1, Command::put("x", 1));
  auto o = c.order(req, {0, 0}, {}, 1);
  std::vector<SpecReplyMsg> rs{c.reply(0, o, req, {}, 1), c.reply(1, o, req, {{3, 0}}, 2),
                               c.reply(2, o, req, {}, 1)};
  auto commit = c.commit(0, {0, 0}, rs);
  EXPECT_TRUE(v.commit(commit));
  auto lied = commit;
  lied.deps.clear();
  lied.sig = c.registry->scheme().sign(c.clients[0], signing_payload(lied));
  EXPECT_FALSE(v.commit(lied));
  auto small = c.commit(0, {0, 0}, {rs[0], rs[1]});
  EXPECT_FALSE(v.commit(small));
  auto stranger = commit;
  stranger.sig = c.registry->scheme().sign(c.clients[1], signing_payload(stranger));
  EXPECT_FALSE(v.commit(stranger));
}

TEST(Verifier, ProofOfMisbehaviour) {
  Cluster c;
  auto v = c.verifier();
  auto req = c.request(0, 1, Command::put("x", 1));
  auto first = c.reply(1, c.order(req, {0, 0}, {}, 1), req, {}, 1);
  auto second = c.reply(2, c.order(req, {0, 1}, {}, 1), req, {}, 1);
  EXPECT_TRUE(v.pom(PomMsg{OwnerNumber{0}, first, second}));
  EXPECT_FALSE(v.pom(PomMsg{OwnerNumber{0}, first, first}));
  EXPECT_FALSE(v.pom(PomMsg{OwnerNumber{1}, first, second}));
  auto other = c.request(0, 2, Command::put("x", 1));
  auto unrelated = c.reply(2, c.order(other, {0, 1}, {}, 1), other, {}, 1);
  EXPECT_FALSE(v.pom(PomMsg{OwnerNumber{0}, first, unrelated}));
}

TEST(ClusterConfig, Quorums) {
  ClusterConfig seven{7, 2, {}};
  EXPECT_TRUE(seven.valid());
  EXPECT_EQ(seven.fast_quorum(), 7u);
  EXPECT_EQ(seven.slow_quorum(), 5u);
  EXPECT_EQ(seven.weak_quorum(), 3u);
  EXPECT_FALSE((ClusterConfig{6, 2, {}}).valid());
  ClusterConfig four{4, 1, {{}, {}, {}, {1, 2, 3}}};
  EXPECT_EQ(four.designated_quorum(3), (std::vector<ReplicaIndex>{1, 2, 3}));
  EXPECT_EQ(four.designated_quorum(0).size(), 3u);
}
