#include <gtest/gtest.h>

#include "ezbft/crypto.hpp"

using namespace ezbft;

namespace {

Bytes from_hex(std::string_view hex) {
  Bytes out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
    out.push_back(static_cast<std::uint8_t>(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
  return out;
}

}  // namespace

TEST(Digest, KnownSha256Vectors) {
  EXPECT_EQ(crypto::digest(std::string_view{}).hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(crypto::digest(std::string_view{"abc"}).hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(crypto::digest(std::string_view{"abc"}).short_hex(), "ba7816bf8f01cfea");
}

TEST(NodeId, TextRoundTrip) {
  for (NodeId id : {NodeId::replica(0), NodeId::replica(12), NodeId::client(3)}) {
    NodeId back;
    ASSERT_TRUE(parse_node_id(id.str(), back));
    EXPECT_EQ(back, id);
  }
  NodeId out;
  EXPECT_FALSE(parse_node_id("X1", out));
  EXPECT_FALSE(parse_node_id("R", out));
  EXPECT_FALSE(parse_node_id("R1x", out));
}

TEST(Ed25519, Rfc8032FirstVector) {
  const auto seed = from_hex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60");
  const auto pk = from_hex("d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a");
  KeyPair kp;
  kp.owner = NodeId::replica(0);
  kp.secret = seed;
  kp.secret.insert(kp.secret.end(), pk.begin(), pk.end());
  kp.pub = {kp.owner, pk};
  crypto::Ed25519Scheme scheme;
  auto sig = scheme.sign(kp, {});
  EXPECT_EQ(sig.bytes, from_hex("e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e06522490155"
                                "5fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b"));
  EXPECT_TRUE(scheme.verify(kp.pub, {}, sig));
}

class SchemeTest : public ::testing::TestWithParam<std::shared_ptr<crypto::SignatureScheme>> {};

TEST_P(SchemeTest, SignVerifyAndReject) {
  const auto& scheme = *GetParam();
  const auto seed = crypto::seed_from(7);
  auto a = scheme.keygen(seed, NodeId::replica(0));
  auto b = scheme.keygen(seed, NodeId::replica(1));
  const Bytes payload{1, 2, 3, 4};
  auto sig = scheme.sign(a, payload);
  EXPECT_EQ(sig.bytes.size(), scheme.signature_size());
  EXPECT_TRUE(scheme.verify(a.pub, payload, sig));
  EXPECT_FALSE(scheme.verify(b.pub, payload, sig));
  EXPECT_FALSE(scheme.verify(a.pub, Bytes{1, 2, 3, 5}, sig));
  auto bad = sig;
  bad.bytes[0] ^= 1;
  EXPECT_FALSE(scheme.verify(a.pub, payload, bad));
  bad.bytes.pop_back();
  EXPECT_FALSE(scheme.verify(a.pub, payload, bad));
}

TEST_P(SchemeTest, KeygenDeterministicPerSeedAndId) {
  const auto& scheme = *GetParam();
  auto a1 = scheme.keygen(crypto::seed_from(1), NodeId::client(0));
  auto a2 = scheme.keygen(crypto::seed_from(1), NodeId::client(0));
  auto other_seed = scheme.keygen(crypto::seed_from(2), NodeId::client(0));
  auto other_id = scheme.keygen(crypto::seed_from(1), NodeId::replica(0));
  EXPECT_EQ(a1.pub, a2.pub);
  EXPECT_NE(a1.pub.material, other_seed.pub.material);
  EXPECT_NE(a1.pub.material, other_id.pub.material);
  EXPECT_EQ(scheme.sign(a1, Bytes{9}), scheme.sign(a2, Bytes{9}));
}

TEST_P(SchemeTest, RegistryChecksSignerIdentity) {
  auto scheme = GetParam();
  crypto::KeyRegistry reg(scheme);
  auto r0 = scheme->keygen(crypto::seed_from(3), NodeId::replica(0));
  auto r1 = scheme->keygen(crypto::seed_from(3), NodeId::replica(1));
  reg.add(r0.pub);
  reg.add(r1.pub);
  const Bytes payload{5};
  auto sig = scheme->sign(r0, payload);
  EXPECT_TRUE(reg.verify(NodeId::replica(0), payload, sig));
  EXPECT_FALSE(reg.verify(NodeId::replica(1), payload, sig));
  EXPECT_FALSE(reg.verify(NodeId::replica(2), payload, sig));  // unknown signer
}

INSTANTIATE_TEST_SUITE_P(Schemes, SchemeTest,
                         ::testing::Values(std::make_shared<crypto::KeyedDigestScheme>(),
                                           std::make_shared<crypto::Ed25519Scheme>()),
                         [](const auto& info) { return std::string(info.param->name() == "ed25519" ? "Ed25519" : "Keyed"); });

TEST(Seed, BigEndianTail) {
  auto s = crypto::seed_from(0x0102);
  EXPECT_EQ(s[31], 0x02);
  EXPECT_EQ(s[30], 0x01);
  EXPECT_EQ(s[0], 0x00);
}
