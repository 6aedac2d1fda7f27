#pragma once

#include <utility>

#include "ezbft/codec.hpp"

namespace ezbft {

/// Seven-field match used by the fast path: (O, I, D', S', c, t, rep).
/// Sender and embedded order are ignored.
bool match_spec_replies(const SpecReplyMsg& a, const SpecReplyMsg& b);

/// Combined slow-path metadata: union of the reported dependency sets and
/// the largest reported sequence number. Each reply's S' already exceeds the
/// sequence numbers of its own D', so the maximum dominates every member of
/// the union that any reply knew about.
std::pair<DepSet, SeqNo> combine(const std::vector<SpecReplyMsg>& replies);

/// Stateless verification against the public-key table. None of these
/// functions look at replica state.
class Verifier {
 public:
  Verifier(const crypto::KeyRegistry& keys, ClusterConfig cluster)
      : keys_(keys), cluster_(std::move(cluster)) {}

  const ClusterConfig& cluster() const { return cluster_; }
  const crypto::KeyRegistry& keys() const { return keys_; }

  bool request(const RequestMsg& m) const;
  /// Signed by the owner implied by its owner number.
  bool spec_order(const SpecOrderCore& o) const;
  bool spec_order(const SpecOrderMsg& m) const;
  /// Reply signature, embedded order signature, and agreement between the
  /// reply core and the order on (O, I, d).
  bool spec_reply(const SpecReplyMsg& m) const;

  bool fast_certificate(const CommitCertificate& cc, const InstanceId& inst) const;
  bool slow_certificate(const CommitCertificate& cc, const InstanceId& inst) const;

  bool commit_fast(const CommitFastMsg& m) const;
  /// Client signature, slow certificate, and (D', S') == combine(CC).
  bool commit(const CommitMsg& m) const;
  bool pom(const PomMsg& m) const;
  bool start_owner_change(const StartOwnerChangeMsg& m) const;
  bool owner_change(const OwnerChangeMsg& m) const;

  /// Evidence that `inst` committed the request with digest `d`.
  bool evidence(const CommitEvidence& e, const InstanceId& inst, const Digest& d) const;

 private:
  bool certificate_common(const CommitCertificate& cc, const InstanceId& inst) const;

  const crypto::KeyRegistry& keys_;
  ClusterConfig cluster_;
};

/// Request digest certified by a piece of commit evidence.
Digest evidence_digest(const CommitEvidence& e);
/// Final (deps, seq) certified by a piece of commit evidence.
std::pair<DepSet, SeqNo> evidence_metadata(const CommitEvidence& e);
InstanceId evidence_instance(const CommitEvidence& e);

}  // namespace ezbft
