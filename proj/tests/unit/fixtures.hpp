#pragma once

#include <memory>
#include <vector>

#include "ezbft/certificates.hpp"
#include "ezbft/codec.hpp"

namespace ezbft::fixture {

/// Keys for an N-replica cluster plus a few clients, and helpers that build
/// correctly signed protocol messages by hand.
struct Cluster {
  explicit Cluster(std::uint32_t f = 1, std::uint32_t clients = 3,
                   std::shared_ptr<const crypto::SignatureScheme> scheme =
                       std::make_shared<crypto::KeyedDigestScheme>())
      : registry(std::make_shared<crypto::KeyRegistry>(scheme)) {
    config.n = 3 * f + 1;
    config.f = f;
    const auto seed = crypto::seed_from(42);
    for (std::uint32_t i = 0; i < config.n; ++i) {
      replicas.push_back(scheme->keygen(seed, NodeId::replica(i)));
      registry->add(replicas.back().pub);
    }
    for (std::uint32_t i = 0; i < clients; ++i) {
      this->clients.push_back(scheme->keygen(seed, NodeId::client(i)));
      registry->add(this->clients.back().pub);
    }
  }

  Verifier verifier() const { return Verifier(*registry, config); }

  RequestMsg request(std::uint32_t client, std::uint64_t t, Command cmd) const {
    RequestMsg r{std::move(cmd), t, NodeId::client(client), std::nullopt, {}};
    r.sig = registry->scheme().sign(clients.at(client), signing_payload(r));
    return r;
  }

  SpecOrderCore order(const RequestMsg& req, InstanceId inst, DepSet deps, std::uint64_t seq,
                      OwnerNumber owner = {}, Digest prev = {}) const {
    if (owner.value == 0 && inst.space != 0) owner.value = inst.space;
    SpecOrderCore o;
    o.owner = owner;
    o.instance = inst;
    o.deps = std::move(deps);
    o.seq = SeqNo{seq};
    o.request_digest = request_digest(req);
    o.space_digest = chain_digest(prev, o);
    o.sig = registry->scheme().sign(replicas.at(owner.owner(config.n)), signing_payload(o));
    return o;
  }

  SpecReplyMsg reply(ReplicaIndex sender, const SpecOrderCore& o, const RequestMsg& req,
                     DepSet deps, std::uint64_t seq, Reply rep = std::nullopt) const {
    SpecReplyMsg r;
    r.owner = o.owner;
    r.instance = o.instance;
    r.deps = std::move(deps);
    r.seq = SeqNo{seq};
    r.request_digest = o.request_digest;
    r.client = req.client;
    r.t = req.t;
    r.sender = sender;
    r.rep = rep;
    r.order = o;
    r.sig = registry->scheme().sign(replicas.at(sender), signing_payload(r));
    return r;
  }

  /// Replies from every sender in `senders`, all echoing the order's metadata.
  std::vector<SpecReplyMsg> matching(const SpecOrderCore& o, const RequestMsg& req,
                                     const std::vector<ReplicaIndex>& senders) const {
    std::vector<SpecReplyMsg> out;
    for (auto s : senders) out.push_back(reply(s, o, req, o.deps, o.seq.value));
    return out;
  }

  CommitMsg commit(std::uint32_t client, InstanceId inst, std::vector<SpecReplyMsg> replies) const {
    CommitMsg c;
    c.client = NodeId::client(client);
    c.instance = inst;
    c.cert = CommitCertificate{CertKind::slow, std::move(replies)};
    std::tie(c.deps, c.seq) = combine(c.cert.replies);
    c.sig = registry->scheme().sign(clients.at(client), signing_payload(c));
    return c;
  }

  ClusterConfig config;
  std::shared_ptr<crypto::KeyRegistry> registry;
  std::vector<KeyPair> replicas;
  std::vector<KeyPair> clients;
};

}  // namespace ezbft::fixture
