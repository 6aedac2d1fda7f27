#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ezbft/crypto.hpp"
#include "ezbft/kv.hpp"

namespace ezbft {

/// Index of a replica, R0..R(N-1).
using ReplicaIndex = std::uint32_t;

/// Global name of one consensus slot: (instance space, slot). Ordered
/// lexicographically.
struct InstanceId {
  ReplicaIndex space = 0;
  std::uint64_t slot = 0;

  /// "R0.3"
  std::string str() const;
  auto operator<=>(const InstanceId&) const = default;
};

/// Epoch of an instance space. The space's current owner is value mod N.
struct OwnerNumber {
  std::uint64_t value = 0;

  ReplicaIndex owner(std::uint32_t n) const { return static_cast<ReplicaIndex>(value % n); }
  OwnerNumber next() const { return {value + 1}; }
  auto operator<=>(const OwnerNumber&) const = default;
};

/// Cycle-breaking sequence number; always >= 1 on the wire.
struct SeqNo {
  std::uint64_t value = 1;
  auto operator<=>(const SeqNo&) const = default;
};

using DepSet = std::set<InstanceId>;

std::string to_string(const DepSet& deps);

enum class CommandStatus : std::uint8_t {
  pre_accepted,
  spec_executed,
  committed_fast,
  committed_slow,
  final_executed,
};

std::string_view to_string(CommandStatus s);
bool is_committed(CommandStatus s);

/// Static quorum layout of a deployment of N = 3f+1 replicas.
struct ClusterConfig {
  std::uint32_t n = 4;
  std::uint32_t f = 1;
  /// Designated slow quorum announced by each command-leader (indexed by
  /// leader). Empty entries fall back to the 2f+1 lowest indices.
  std::vector<std::vector<ReplicaIndex>> slow_quorums;

  std::uint32_t fast_quorum() const { return n; }
  std::uint32_t slow_quorum() const { return 2 * f + 1; }
  std::uint32_t weak_quorum() const { return f + 1; }

  std::vector<ReplicaIndex> designated_quorum(ReplicaIndex leader) const;
  bool valid() const { return n == 3 * f + 1 && f >= 1; }
};

// --- messages -------------------------------------------------------------

/// Client request. `original` is set only on the retransmission form
/// (client broadcast after a timeout) and names the first recipient; it is
/// a routing hint excluded from both the client signature and the request
/// digest, so every form of one request shares the same identity.
struct RequestMsg {
  Command command;
  std::uint64_t t = 0;
  NodeId client;
  std::optional<ReplicaIndex> original;
  Signature sig;

  CommandId id() const { return {client, t}; }
  RequestMsg base_form() const {
    RequestMsg r = *this;
    r.original.reset();
    return r;
  }
  bool operator==(const RequestMsg&) const = default;
};

/// Signed ordering proposal of the command-leader (the "SO" embedded in
/// replies and certificates).
struct SpecOrderCore {
  OwnerNumber owner;
  InstanceId instance;
  DepSet deps;
  SeqNo seq;
  Digest space_digest;
  Digest request_digest;
  Signature sig;

  bool operator==(const SpecOrderCore&) const = default;
};

struct SpecOrderMsg {
  SpecOrderCore order;
  RequestMsg request;
  bool operator==(const SpecOrderMsg&) const = default;
};

/// Speculative reply. The signature covers (owner, instance, deps, seq,
/// request_digest, client, t) under the sender's key; sender, rep and the
/// embedded order travel outside it.
struct SpecReplyMsg {
  OwnerNumber owner;
  InstanceId instance;
  DepSet deps;
  SeqNo seq;
  Digest request_digest;
  NodeId client;
  std::uint64_t t = 0;
  Signature sig;
  ReplicaIndex sender = 0;
  Reply rep;
  SpecOrderCore order;

  bool operator==(const SpecReplyMsg&) const = default;
};

enum class CertKind : std::uint8_t { fast = 0, slow = 1 };

struct CommitCertificate {
  CertKind kind = CertKind::fast;
  std::vector<SpecReplyMsg> replies;
  bool operator==(const CommitCertificate&) const = default;
};

/// Unsigned; trust comes from the embedded signed replies.
struct CommitFastMsg {
  NodeId client;
  InstanceId instance;
  CommitCertificate cert;
  bool operator==(const CommitFastMsg&) const = default;
};

/// Client-signed slow-path commit with the combined dependencies.
struct CommitMsg {
  NodeId client;
  InstanceId instance;
  DepSet deps;
  SeqNo seq;
  CommitCertificate cert;
  Signature sig;
  bool operator==(const CommitMsg&) const = default;
};

struct CommitReplyMsg {
  InstanceId instance;
  NodeId client;
  std::uint64_t t = 0;
  Reply rep;
  ReplicaIndex sender = 0;
  bool operator==(const CommitReplyMsg&) const = default;
};

struct ResendReqMsg {
  RequestMsg request;
  ReplicaIndex sender = 0;
  bool operator==(const ResendReqMsg&) const = default;
};

/// Proof of misbehaviour: two replies whose embedded orders were signed by
/// the same leader for the same request at different instances.
struct PomMsg {
  OwnerNumber owner;
  SpecReplyMsg first;
  SpecReplyMsg second;
  bool operator==(const PomMsg&) const = default;
};

struct StartOwnerChangeMsg {
  ReplicaIndex suspect = 0;
  OwnerNumber owner;
  ReplicaIndex sender = 0;
  Signature sig;
  bool operator==(const StartOwnerChangeMsg&) const = default;
};

using CommitEvidence = std::variant<CommitFastMsg, CommitMsg>;

/// One slot of a replica's view of an instance space.
struct HistoryEntry {
  SpecOrderCore order;
  RequestMsg request;
  std::optional<CommitEvidence> commit;
  bool operator==(const HistoryEntry&) const = default;
};

struct OwnerChangeMsg {
  ReplicaIndex space = 0;
  OwnerNumber new_owner;
  ReplicaIndex sender = 0;
  /// Opaque checkpoint marker; `entries` start at this slot.
  std::uint64_t checkpoint = 0;
  std::vector<HistoryEntry> entries;
  std::optional<CommitEvidence> highest_commit;
  Signature sig;
  bool operator==(const OwnerChangeMsg&) const = default;
};

/// Entry of the safe history G with its final metadata.
struct SafeInstance {
  SpecOrderCore order;
  RequestMsg request;
  DepSet deps;
  SeqNo seq;
  bool operator==(const SafeInstance&) const = default;
};

struct NewOwnerMsg {
  ReplicaIndex space = 0;
  OwnerNumber new_owner;
  ReplicaIndex sender = 0;
  /// First slot covered by `safe`; slots below it are left untouched.
  std::uint64_t base = 0;
  std::vector<OwnerChangeMsg> proof;
  std::vector<SafeInstance> safe;
  Signature sig;
  bool operator==(const NewOwnerMsg&) const = default;
};

/// Alternative order matches the wire tag (index + 1).
using Message =
    std::variant<RequestMsg, SpecOrderMsg, SpecReplyMsg, CommitFastMsg, CommitMsg,
                 CommitReplyMsg, ResendReqMsg, PomMsg, StartOwnerChangeMsg,
                 OwnerChangeMsg, NewOwnerMsg>;

std::string_view kind_name(const Message& m);

/// Instance a message refers to, if it names exactly one.
std::optional<InstanceId> instance_of(const Message& m);

}  // namespace ezbft
