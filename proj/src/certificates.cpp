#include "ezbft/certificates.hpp"

#include <set>

namespace ezbft {

bool match_spec_replies(const SpecReplyMsg& a, const SpecReplyMsg& b) {
  return a.owner == b.owner && a.instance == b.instance && a.deps == b.deps && a.seq == b.seq &&
         a.client == b.client && a.t == b.t && a.rep == b.rep;
}

std::pair<DepSet, SeqNo> combine(const std::vector<SpecReplyMsg>& replies) {
  DepSet deps;
  SeqNo seq{1};
  for (const auto& r : replies) {
    deps.insert(r.deps.begin(), r.deps.end());
    seq = std::max(seq, r.seq);
  }
  return {std::move(deps), seq};
}

bool Verifier::request(const RequestMsg& m) const {
  if (!m.client.is_client()) return false;
  return keys_.verify(m.client, signing_payload(m), m.sig);
}

bool Verifier::spec_order(const SpecOrderCore& o) const {
  if (o.seq.value == 0) return false;
  if (o.instance.space >= cluster_.n) return false;
  if (o.deps.count(o.instance)) return false;
  NodeId signer = NodeId::replica(o.owner.owner(cluster_.n));
  return keys_.verify(signer, signing_payload(o), o.sig);
}

bool Verifier::spec_order(const SpecOrderMsg& m) const {
  return spec_order(m.order) && request_digest(m.request) == m.order.request_digest &&
         request(m.request);
}

bool Verifier::spec_reply(const SpecReplyMsg& m) const {
  if (m.sender >= cluster_.n || m.seq.value == 0) return false;
  if (m.owner != m.order.owner || m.instance != m.order.instance ||
      m.request_digest != m.order.request_digest)
    return false;
  if (m.deps.count(m.instance)) return false;
  if (!keys_.verify(NodeId::replica(m.sender), signing_payload(m), m.sig)) return false;
  return spec_order(m.order);
}

bool Verifier::certificate_common(const CommitCertificate& cc, const InstanceId& inst) const {
  if (cc.replies.empty()) return false;
  std::set<ReplicaIndex> senders;
  const auto& first = cc.replies.front();
  for (const auto& r : cc.replies) {
    if (!senders.insert(r.sender).second) return false;
    if (r.instance != inst || r.owner != first.owner || r.request_digest != first.request_digest ||
        r.client != first.client || r.t != first.t)
      return false;
    if (!spec_reply(r)) return false;
  }
  return true;
}

bool Verifier::fast_certificate(const CommitCertificate& cc, const InstanceId& inst) const {
  if (cc.kind != CertKind::fast || cc.replies.size() != cluster_.fast_quorum()) return false;
  if (!certificate_common(cc, inst)) return false;
  for (const auto& r : cc.replies)
    if (!match_spec_replies(r, cc.replies.front())) return false;
  return true;
}

bool Verifier::slow_certificate(const CommitCertificate& cc, const InstanceId& inst) const {
  if (cc.kind != CertKind::slow || cc.replies.size() != cluster_.slow_quorum()) return false;
  return certificate_common(cc, inst);
}

bool Verifier::commit_fast(const CommitFastMsg& m) const {
  if (!fast_certificate(m.cert, m.instance)) return false;
  return m.cert.replies.front().client == m.client;
}

bool Verifier::commit(const CommitMsg& m) const {
  if (!m.client.is_client()) return false;
  if (!slow_certificate(m.cert, m.instance)) return false;
  if (m.cert.replies.front().client != m.client) return false;
  auto [deps, seq] = combine(m.cert.replies);
  if (deps != m.deps || seq != m.seq) return false;
  return keys_.verify(m.client, signing_payload(m), m.sig);
}

bool Verifier::pom(const PomMsg& m) const {
  const auto& a = m.first.order;
  const auto& b = m.second.order;
  if (m.owner != a.owner || a.owner != b.owner) return false;
  if (a.request_digest != b.request_digest || a.instance == b.instance) return false;
  if (a.instance.space != b.instance.space) return false;
  return spec_reply(m.first) && spec_reply(m.second);
}

bool Verifier::start_owner_change(const StartOwnerChangeMsg& m) const {
  if (m.sender >= cluster_.n || m.suspect >= cluster_.n) return false;
  return keys_.verify(NodeId::replica(m.sender), signing_payload(m), m.sig);
}

bool Verifier::owner_change(const OwnerChangeMsg& m) const {
  if (m.sender >= cluster_.n || m.space >= cluster_.n) return false;
  return keys_.verify(NodeId::replica(m.sender), signing_payload(m), m.sig);
}

bool Verifier::evidence(const CommitEvidence& e, const InstanceId& inst, const Digest& d) const {
  if (evidence_instance(e) != inst) return false;
  if (evidence_digest(e) != d) return false;
  return std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CommitFastMsg>)
          return commit_fast(m);
        else
          return commit(m);
      },
      e);
}

Digest evidence_digest(const CommitEvidence& e) {
  return std::visit(
      [](const auto& m) {
        return m.cert.replies.empty() ? Digest{} : m.cert.replies.front().request_digest;
      },
      e);
}

std::pair<DepSet, SeqNo> evidence_metadata(const CommitEvidence& e) {
  return std::visit(
      [](const auto& m) -> std::pair<DepSet, SeqNo> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CommitFastMsg>) {
          if (m.cert.replies.empty()) return {};
          return {m.cert.replies.front().deps, m.cert.replies.front().seq};
        } else {
          return {m.deps, m.seq};
        }
      },
      e);
}

InstanceId evidence_instance(const CommitEvidence& e) {
  return std::visit([](const auto& m) { return m.instance; }, e);
}

}  // namespace ezbft
