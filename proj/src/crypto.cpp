#include "ezbft/crypto.hpp"

#include <sodium.h>

#include <charconv>
#include <stdexcept>

namespace ezbft {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

Bytes encode_id(NodeId id) {
  return {static_cast<std::uint8_t>(id.kind),
          static_cast<std::uint8_t>(id.index >> 24),
          static_cast<std::uint8_t>(id.index >> 16),
          static_cast<std::uint8_t>(id.index >> 8),
          static_cast<std::uint8_t>(id.index)};
}

std::string to_hex(const std::uint8_t* p, std::size_t n) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(kHex[p[i] >> 4]);
    out.push_back(kHex[p[i] & 0xf]);
  }
  return out;
}

// Per-node key seed: SHA-256(domain || seed || id).
std::array<std::uint8_t, 32> derive(std::string_view domain, const Seed& seed,
                                    NodeId id) {
  Bytes buf(domain.begin(), domain.end());
  buf.insert(buf.end(), seed.begin(), seed.end());
  auto enc = encode_id(id);
  buf.insert(buf.end(), enc.begin(), enc.end());
  return crypto::digest(buf).bytes;
}

}  // namespace

std::string NodeId::str() const {
  return (kind == NodeKind::replica ? "R" : "C") + std::to_string(index);
}

bool parse_node_id(std::string_view text, NodeId& out) {
  if (text.size() < 2) return false;
  NodeKind kind;
  if (text[0] == 'R')
    kind = NodeKind::replica;
  else if (text[0] == 'C')
    kind = NodeKind::client;
  else
    return false;
  std::uint32_t index = 0;
  auto [ptr, ec] = std::from_chars(text.data() + 1, text.data() + text.size(), index);
  if (ec != std::errc() || ptr != text.data() + text.size()) return false;
  out = {kind, index};
  return true;
}

std::string Digest::hex() const { return to_hex(bytes.data(), bytes.size()); }
std::string Digest::short_hex() const { return to_hex(bytes.data(), 8); }

namespace crypto {

Digest digest(ByteView payload) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), payload.data(), payload.size());
  return d;
}

Digest digest(std::string_view payload) { return digest(as_bytes(payload)); }

Seed seed_from(std::uint64_t value) {
  Seed s{};
  for (int i = 0; i < 8; ++i) s[31 - i] = static_cast<std::uint8_t>(value >> (8 * i));
  return s;
}

KeyPair KeyedDigestScheme::keygen(const Seed& seed, NodeId id) const {
  auto secret = derive("ezbft/keyed-sha256", seed, id);
  KeyPair kp;
  kp.owner = id;
  kp.secret.assign(secret.begin(), secret.end());
  kp.pub = {id, kp.secret};
  return kp;
}

namespace {

Signature hmac(const Bytes& key, NodeId signer, ByteView payload) {
  ensure_sodium();
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  auto enc = encode_id(signer);
  crypto_auth_hmacsha256_update(&st, enc.data(), enc.size());
  crypto_auth_hmacsha256_update(&st, payload.data(), payload.size());
  Signature sig;
  sig.bytes.resize(crypto_auth_hmacsha256_BYTES);
  crypto_auth_hmacsha256_final(&st, sig.bytes.data());
  return sig;
}

}  // namespace

Signature KeyedDigestScheme::sign(const KeyPair& key, ByteView payload) const {
  return hmac(key.secret, key.owner, payload);
}

bool KeyedDigestScheme::verify(const PublicKey& key, ByteView payload,
                               const Signature& sig) const {
  if (sig.bytes.size() != signature_size()) return false;
  auto expected = hmac(key.material, key.owner, payload);
  return sodium_memcmp(expected.bytes.data(), sig.bytes.data(), sig.bytes.size()) == 0;
}

KeyPair Ed25519Scheme::keygen(const Seed& seed, NodeId id) const {
  ensure_sodium();
  auto derived = derive("ezbft/ed25519", seed, id);
  KeyPair kp;
  kp.owner = id;
  kp.secret.resize(crypto_sign_SECRETKEYBYTES);
  Bytes pk(crypto_sign_PUBLICKEYBYTES);
  crypto_sign_seed_keypair(pk.data(), kp.secret.data(), derived.data());
  kp.pub = {id, std::move(pk)};
  return kp;
}

Signature Ed25519Scheme::sign(const KeyPair& key, ByteView payload) const {
  ensure_sodium();
  Signature sig;
  sig.bytes.resize(crypto_sign_BYTES);
  crypto_sign_detached(sig.bytes.data(), nullptr, payload.data(), payload.size(),
                       key.secret.data());
  return sig;
}

bool Ed25519Scheme::verify(const PublicKey& key, ByteView payload,
                           const Signature& sig) const {
  ensure_sodium();
  if (sig.bytes.size() != crypto_sign_BYTES ||
      key.material.size() != crypto_sign_PUBLICKEYBYTES)
    return false;
  return crypto_sign_verify_detached(sig.bytes.data(), payload.data(), payload.size(),
                                     key.material.data()) == 0;
}

const PublicKey* KeyRegistry::find(NodeId id) const {
  auto it = keys_.find(id);
  return it == keys_.end() ? nullptr : &it->second;
}

bool KeyRegistry::verify(NodeId signer, ByteView payload, const Signature& sig) const {
  const PublicKey* key = find(signer);
  return key != nullptr && scheme_->verify(*key, payload, sig);
}

}  // namespace crypto
}  // namespace ezbft
