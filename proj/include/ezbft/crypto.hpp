#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ezbft {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

enum class NodeKind : std::uint8_t { replica = 0, client = 1 };

/// Identity of a protocol participant. Replicas are R0..R(N-1); clients are
/// numbered independently.
struct NodeId {
  NodeKind kind = NodeKind::replica;
  std::uint32_t index = 0;

  static constexpr NodeId replica(std::uint32_t i) { return {NodeKind::replica, i}; }
  static constexpr NodeId client(std::uint32_t i) { return {NodeKind::client, i}; }

  bool is_replica() const { return kind == NodeKind::replica; }
  bool is_client() const { return kind == NodeKind::client; }

  /// "R3" / "C0"
  std::string str() const;

  auto operator<=>(const NodeId&) const = default;
};

/// Parses the "R3" / "C0" form produced by NodeId::str().
bool parse_node_id(std::string_view text, NodeId& out);

struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  /// First 8 bytes in hex; enough to tell commands apart in traces.
  std::string short_hex() const;

  auto operator<=>(const Digest&) const = default;
};

using Seed = std::array<std::uint8_t, 32>;

struct PublicKey {
  NodeId owner;
  Bytes material;
  bool operator==(const PublicKey&) const = default;
};

struct KeyPair {
  NodeId owner;
  Bytes secret;
  PublicKey pub;
};

struct Signature {
  Bytes bytes;
  bool operator==(const Signature&) const = default;
};

namespace crypto {

/// SHA-256 of the payload.
Digest digest(ByteView payload);
Digest digest(std::string_view payload);

/// Name of the hash used by digest(); recorded in trace headers.
constexpr std::string_view kDigestName = "sha256";

/// Pluggable signing backend. Implementations must be deterministic and
/// stateless so a scheme instance can be shared across threads.
class SignatureScheme {
 public:
  virtual ~SignatureScheme() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t signature_size() const = 0;
  virtual KeyPair keygen(const Seed& seed, NodeId id) const = 0;
  virtual Signature sign(const KeyPair& key, ByteView payload) const = 0;
  virtual bool verify(const PublicKey& key, ByteView payload,
                      const Signature& sig) const = 0;
};

/// Simulation scheme: the signature is HMAC-SHA256 over (signer id || payload)
/// keyed by a secret derived from (seed, id). The "public key" carries the
/// secret, which is acceptable only because simulated adversaries are
/// scripted strategies that never attempt forgery.
class KeyedDigestScheme final : public SignatureScheme {
 public:
  std::string_view name() const override { return "keyed-sha256"; }
  std::size_t signature_size() const override { return 32; }
  KeyPair keygen(const Seed& seed, NodeId id) const override;
  Signature sign(const KeyPair& key, ByteView payload) const override;
  bool verify(const PublicKey& key, ByteView payload,
              const Signature& sig) const override;
};

/// Ed25519 with keys derived deterministically from (seed, id).
class Ed25519Scheme final : public SignatureScheme {
 public:
  std::string_view name() const override { return "ed25519"; }
  std::size_t signature_size() const override { return 64; }
  KeyPair keygen(const Seed& seed, NodeId id) const override;
  Signature sign(const KeyPair& key, ByteView payload) const override;
  bool verify(const PublicKey& key, ByteView payload,
              const Signature& sig) const override;
};

/// Public keys of every node, shared read-only by all participants of a run.
class KeyRegistry {
 public:
  KeyRegistry(std::shared_ptr<const SignatureScheme> scheme)
      : scheme_(std::move(scheme)) {}

  void add(const PublicKey& key) { keys_[key.owner] = key; }
  const PublicKey* find(NodeId id) const;

  bool verify(NodeId signer, ByteView payload, const Signature& sig) const;

  const SignatureScheme& scheme() const { return *scheme_; }

 private:
  std::shared_ptr<const SignatureScheme> scheme_;
  std::map<NodeId, PublicKey> keys_;
};

/// 32-byte seed holding `value` big-endian in its last eight bytes.
Seed seed_from(std::uint64_t value);

}  // namespace crypto
}  // namespace ezbft
