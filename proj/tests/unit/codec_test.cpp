#include <gtest/gtest.h>

#include <map>
#include <random>

#include "ezbft/codec.hpp"
#include "fixtures.hpp"

using namespace ezbft;

namespace {

// Small value domains so that distinct messages often differ in one field only.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t pick(std::uint64_t n) { return rng_() % n; }

  NodeId node() { return pick(2) ? NodeId::replica(pick(4)) : NodeId::client(pick(3)); }
  InstanceId inst() { return {static_cast<ReplicaIndex>(pick(4)), pick(3)}; }
  DepSet deps() {
    DepSet d;
    for (auto n = pick(3); n > 0; --n) d.insert(inst());
    return d;
  }
  Digest digest() {
    Digest d;
    d.bytes[pick(32)] = static_cast<std::uint8_t>(pick(3));
    return d;
  }
  Signature sig() {
    Signature s;
    for (auto n = pick(3); n > 0; --n) s.bytes.push_back(static_cast<std::uint8_t>(pick(2)));
    return s;
  }
  Reply rep() { return pick(3) ? Reply(static_cast<std::int64_t>(pick(3)) - 1) : std::nullopt; }
  Command command() {
    const std::string key = pick(2) ? "x" : (pick(2) ? "" : "xy");
    switch (pick(3)) {
      case 0: return Command::get(key);
      case 1: return Command::put(key, static_cast<std::int64_t>(pick(3)) - 1);
      default: return Command::increment(key, static_cast<std::int64_t>(pick(2)));
    }
  }
  RequestMsg request() {
    RequestMsg r{command(), pick(3), NodeId::client(pick(2)), std::nullopt, sig()};
    if (pick(3) == 0) r.original = static_cast<ReplicaIndex>(pick(2));
    return r;
  }
  SpecOrderCore order() {
    return {OwnerNumber{pick(3)}, inst(), deps(), SeqNo{pick(3)}, digest(), digest(), sig()};
  }
  SpecReplyMsg reply() {
    return {OwnerNumber{pick(2)}, inst(), deps(), SeqNo{pick(3)}, digest(), NodeId::client(pick(2)),
            pick(2), sig(), static_cast<ReplicaIndex>(pick(4)), rep(), order()};
  }
  CommitCertificate cert() {
    CommitCertificate c{pick(2) ? CertKind::fast : CertKind::slow, {}};
    for (auto n = pick(3); n > 0; --n) c.replies.push_back(reply());
    return c;
  }
  CommitEvidence evidence() {
    if (pick(2)) return CommitFastMsg{NodeId::client(pick(2)), inst(), cert()};
    return CommitMsg{NodeId::client(pick(2)), inst(), deps(), SeqNo{pick(3)}, cert(), sig()};
  }
  HistoryEntry entry() {
    HistoryEntry e{order(), request(), std::nullopt};
    if (pick(2)) e.commit = evidence();
    return e;
  }
  OwnerChangeMsg owner_change() {
    OwnerChangeMsg m{static_cast<ReplicaIndex>(pick(4)), OwnerNumber{pick(3)},
                     static_cast<ReplicaIndex>(pick(4)), pick(3), {}, std::nullopt, sig()};
    for (auto n = pick(3); n > 0; --n) m.entries.push_back(entry());
    if (pick(2)) m.highest_commit = evidence();
    return m;
  }

  Message message() {
    switch (pick(11)) {
      case 0: return request();
      case 1: return SpecOrderMsg{order(), request()};
      case 2: return reply();
      case 3: return CommitFastMsg{NodeId::client(pick(2)), inst(), cert()};
      case 4: return CommitMsg{NodeId::client(pick(2)), inst(), deps(), SeqNo{pick(3)}, cert(), sig()};
      case 5: return CommitReplyMsg{inst(), NodeId::client(pick(2)), pick(3), rep(),
                                    static_cast<ReplicaIndex>(pick(4))};
      case 6: return ResendReqMsg{request(), static_cast<ReplicaIndex>(pick(4))};
      case 7: return PomMsg{OwnerNumber{pick(2)}, reply(), reply()};
      case 8: return StartOwnerChangeMsg{static_cast<ReplicaIndex>(pick(4)), OwnerNumber{pick(3)},
                                         static_cast<ReplicaIndex>(pick(4)), sig()};
      case 9: return owner_change();
      default: {
        NewOwnerMsg m{static_cast<ReplicaIndex>(pick(4)), OwnerNumber{pick(3)},
                      static_cast<ReplicaIndex>(pick(4)), pick(3), {}, {}, sig()};
        for (auto n = pick(2); n > 0; --n) m.proof.push_back(owner_change());
        for (auto n = pick(3); n > 0; --n)
          m.safe.push_back({order(), request(), deps(), SeqNo{pick(3)}});
        return m;
      }
    }
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

TEST(Codec, RoundTripEveryKind) {
  Gen g(1);
  std::set<std::size_t> kinds;
  for (int i = 0; i < 2000; ++i) {
    auto m = g.message();
    kinds.insert(m.index());
    auto bytes = encode(m);
    ASSERT_EQ(bytes.front(), m.index() + 1);
    auto back = decode(bytes);
    ASSERT_TRUE(back.has_value()) << kind_name(m);
    EXPECT_EQ(*back, m);
  }
  EXPECT_EQ(kinds.size(), std::variant_size_v<Message>);
}

// Injectivity over 100k random messages, checked two ways: no two unequal
// messages share an encoding, and decoding inverts encoding.
TEST(Codec, EncodingIsInjective) {
  Gen g(2024);
  std::map<Bytes, Message> seen;
  std::size_t collisions = 0;
  for (int i = 0; i < 100'000; ++i) {
    auto m = g.message();
    auto bytes = encode(m);
    auto [it, fresh] = seen.try_emplace(bytes, m);
    if (!fresh) {
      ++collisions;
      ASSERT_EQ(it->second, m) << "distinct messages share an encoding";
    }
    auto back = decode(bytes);
    ASSERT_TRUE(back && *back == m);
  }
  // The generator's small domains must actually produce repeats, or the
  // first check proves nothing.
  EXPECT_GT(collisions, 0u);
}

TEST(Codec, StrictDecoder) {
  Gen g(3);
  for (int i = 0; i < 300; ++i) {
    auto bytes = encode(g.message());
    auto longer = bytes;
    longer.push_back(0);
    EXPECT_FALSE(decode(longer).has_value());
    for (std::size_t cut : {std::size_t{0}, bytes.size() / 2, bytes.size() - 1}) {
      Bytes shorter(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
      EXPECT_FALSE(decode(shorter).has_value());
    }
  }
  EXPECT_FALSE(decode(Bytes{0}).has_value());
  EXPECT_FALSE(decode(Bytes{12}).has_value());
}

TEST(Codec, FrozenRequestEncoding) {
  RequestMsg r{Command::put("x", 1), 2, NodeId::client(3), std::nullopt, {}};
  const Bytes expected{1,                                   // tag
                       1, 0, 0, 0, 1, 'x',                  // op, key
                       0, 0, 0, 0, 0, 0, 0, 1,              // value
                       0, 0, 0, 0, 0, 0, 0, 2,              // t
                       1, 0, 0, 0, 3,                       // client
                       0,                                   // no hint
                       0, 0, 0, 0};                         // empty signature
  EXPECT_EQ(encode(r), expected);
}

TEST(Codec, SignaturePayloadsIgnoreSignature) {
  fixture::Cluster c;
  auto req = c.request(0, 1, Command::put("x", 1));
  auto stripped = req;
  stripped.sig = {};
  EXPECT_EQ(signing_payload(req), signing_payload(stripped));
  EXPECT_EQ(signing_payload(stripped), encode(stripped));

  auto o = c.order(req, {1, 0}, {}, 1);
  auto r = c.reply(2, o, req, {}, 1, 5);
  auto r2 = r;
  r2.rep = 6;          // outside the signed core
  r2.sender = 3;
  EXPECT_EQ(signing_payload(r), signing_payload(r2));
  r2.deps.insert({0, 0});
  EXPECT_NE(signing_payload(r), signing_payload(r2));
}

TEST(Codec, RetransmissionHintOutsideIdentity) {
  fixture::Cluster c;
  auto req = c.request(1, 4, Command::get("k"));
  auto hinted = req;
  hinted.original = 2;
  EXPECT_EQ(request_digest(req), request_digest(hinted));
  EXPECT_EQ(signing_payload(req), signing_payload(hinted));
  EXPECT_NE(encode(req), encode(hinted));
  EXPECT_TRUE(c.verifier().request(hinted));
}

TEST(Codec, ChainDigestCoversEveryField) {
  fixture::Cluster c;
  auto req = c.request(0, 1, Command::put("x", 1));
  auto o = c.order(req, {0, 0}, {{1, 0}}, 2);
  const Digest prev{};
  const auto base = chain_digest(prev, o);
  auto variant = [&](auto mutate) {
    auto copy = o;
    mutate(copy);
    return chain_digest(prev, copy);
  };
  EXPECT_NE(base, variant([](auto& x) { x.owner.value = 4; }));
  EXPECT_NE(base, variant([](auto& x) { x.instance.slot = 1; }));
  EXPECT_NE(base, variant([](auto& x) { x.deps.clear(); }));
  EXPECT_NE(base, variant([](auto& x) { x.seq.value = 3; }));
  EXPECT_NE(base, variant([](auto& x) { x.request_digest.bytes[0] ^= 1; }));
  EXPECT_EQ(base, variant([](auto& x) { x.sig.bytes.push_back(1); }));
  Digest other{};
  other.bytes[5] = 1;
  EXPECT_NE(base, chain_digest(other, o));
}

TEST(Codec, HistoryEncodingDistinguishesContents) {
  fixture::Cluster c;
  auto req = c.request(0, 1, Command::put("x", 1));
  SafeInstance a{c.order(req, {0, 0}, {}, 1), req, {}, SeqNo{1}};
  SafeInstance b = a;
  b.seq = SeqNo{2};
  EXPECT_NE(encode_history({a}), encode_history({b}));
  EXPECT_NE(encode_history({a}), encode_history({a, a}));
  EXPECT_EQ(encode_history({a, b}), encode_history({a, b}));
}
