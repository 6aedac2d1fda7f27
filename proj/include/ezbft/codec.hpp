#pragma once

#include <optional>

#include "ezbft/messages.hpp"

namespace ezbft {

// Canonical wire encoding. Every message starts with a one-byte kind tag;
// integers are fixed-width big-endian; byte strings, strings and lists carry
// a u32 length prefix; dependency sets are written in InstanceId order.
//
// Signatures are computed over the message encoding with its own signature
// field replaced by an empty byte string.

enum class Tag : std::uint8_t {
  request = 1,
  spec_order = 2,
  spec_reply = 3,
  commit_fast = 4,
  commit = 5,
  commit_reply = 6,
  resend_req = 7,
  pom = 8,
  start_owner_change = 9,
  owner_change = 10,
  new_owner = 11,
};

Bytes encode(const Message& m);

/// Strict decoder: rejects unknown tags, truncated input and trailing bytes.
std::optional<Message> decode(ByteView bytes);

Bytes signing_payload(const RequestMsg& m);
Bytes signing_payload(const SpecOrderCore& m);
Bytes signing_payload(const SpecReplyMsg& m);
Bytes signing_payload(const CommitMsg& m);
Bytes signing_payload(const StartOwnerChangeMsg& m);
Bytes signing_payload(const OwnerChangeMsg& m);
Bytes signing_payload(const NewOwnerMsg& m);

/// d = H(request), computed over the base form (no retransmission hint).
Digest request_digest(const RequestMsg& m);

/// Space digest chain: h_k = H(h_{k-1} || owner || instance || deps || seq || d).
Digest chain_digest(const Digest& prev, const SpecOrderCore& order);

/// Encoding of a safe history, used to compare NewOwner contents.
Bytes encode_history(const std::vector<SafeInstance>& g);

}  // namespace ezbft
