#pragma once

#include <functional>
#include <map>
#include <memory>

#include "ezbft/certificates.hpp"
#include "ezbft/context.hpp"

namespace ezbft {

struct ClientOptions {
  ClusterConfig cluster;
  ReplicaIndex home = 0;
  /// Spec-wait deadline after which the slow path is attempted.
  Time slow_timeout = 200 * kMillisecond;
  /// Deadline after which the request is rebroadcast to every replica.
  Time retransmit_timeout = 600 * kMillisecond;
  /// Retransmit backoff doubles up to this factor.
  std::uint32_t backoff_cap = 16;
};

enum class CommitPath : std::uint8_t { fast, slow };

struct Delivery {
  CommandId id;
  Command command;
  Reply reply;
  Time submitted = 0;
  Time delivered = 0;
  CommitPath path = CommitPath::fast;
  /// Causal message steps on the critical path (3 fast, 5 slow).
  int steps = 0;
  InstanceId instance;
};

class Client : public Node {
 public:
  enum class Phase : std::uint8_t { idle, speculative_wait, slow_wait };

  Client(NodeId id, ClientOptions opts, KeyPair key,
         std::shared_ptr<const crypto::KeyRegistry> keys);

  /// Starts a command; false while another one is pending (closed loop).
  bool submit(Context& ctx, const Command& cmd);

  void receive(Context& ctx, NodeId from, const Message& m) override;
  void timer(Context& ctx, std::uint64_t id) override;

  /// Invoked after each delivery, inside the delivering handler.
  std::function<void(Context&, const Delivery&)> on_deliver;

  NodeId id() const { return id_; }
  Phase phase() const { return phase_; }
  ReplicaIndex target() const { return target_; }
  const std::vector<Delivery>& deliveries() const { return deliveries_; }
  std::size_t poms_sent() const { return poms_sent_; }
  std::size_t retransmissions() const { return retransmissions_; }
  const std::vector<PomMsg>& poms() const { return poms_; }

 private:
  struct StoredReply {
    SpecReplyMsg msg;
    int depth = 0;
  };
  struct CommitTally {
    Reply rep;
    InstanceId instance;
  };

  void on_spec_reply(Context& ctx, const SpecReplyMsg& m);
  void on_commit_reply(Context& ctx, NodeId from, const CommitReplyMsg& m);
  void check_pom(Context& ctx, const SpecReplyMsg& m);
  bool try_slow(Context& ctx);
  void retransmit(Context& ctx);
  void deliver(Context& ctx, CommitPath path, const Reply& rep, const InstanceId& inst,
               int steps);
  void arm_timers(Context& ctx);
  void send_to_all(Context& ctx, const Message& m);

  NodeId id_;
  ClientOptions opts_;
  KeyPair key_;
  std::shared_ptr<const crypto::KeyRegistry> keys_;
  Verifier verifier_;
  ReplicaIndex target_;

  Phase phase_ = Phase::idle;
  std::uint64_t t_ = 0;
  RequestMsg request_;
  Digest digest_;
  Time submitted_ = 0;
  std::map<InstanceId, std::map<ReplicaIndex, StoredReply>> replies_;
  std::map<ReplicaIndex, CommitTally> commit_replies_;
  std::optional<CommitMsg> commit_;
  std::uint32_t backoff_ = 1;
  std::uint64_t generation_ = 0;
  bool pom_sent_ = false;

  // Replies to the last delivered request are still inspected for POMs.
  std::uint64_t last_t_ = 0;
  Digest last_digest_;
  std::map<InstanceId, SpecReplyMsg> last_orders_;
  bool last_pom_sent_ = false;

  std::vector<Delivery> deliveries_;
  std::vector<PomMsg> poms_;
  std::size_t poms_sent_ = 0;
  std::size_t retransmissions_ = 0;
};

}  // namespace ezbft
