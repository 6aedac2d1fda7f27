#pragma once

#include <map>
#include <memory>
#include <set>
#include <variant>

#include "ezbft/certificates.hpp"
#include "ezbft/context.hpp"
#include "ezbft/execution.hpp"

namespace ezbft {

struct ReplicaOptions {
  ClusterConfig cluster;
  /// Wait for the original recipient's SpecOrder after sending ResendReq.
  Time resend_timeout = 600 * kMillisecond;
  /// Wait for a slot gap to fill before dropping buffered SpecOrders.
  Time buffer_timeout = 600 * kMillisecond;
  /// Wait for NewOwner after committing to an owner change.
  Time owner_change_timeout = 1200 * kMillisecond;
  /// OwnerChange messages the new owner waits for; 0 means 2f+1.
  std::uint32_t owner_change_quorum = 0;
  std::uint64_t checkpoint_interval = 128;
  std::size_t buffer_limit = 1024;
  RollbackMode rollback = RollbackMode::partial;
};

struct CommandRecord {
  InstanceId instance;
  RequestMsg request;
  SpecOrderCore order;
  /// Local view: D'/S' until commit, final metadata afterwards.
  DepSet deps;
  SeqNo seq;
  CommandStatus status = CommandStatus::pre_accepted;
  bool spec_reply_sent = false;
  Reply spec_rep;
  Reply final_rep;
  std::optional<CommitEvidence> commit;
  /// Answer the client with CommitReply once final.
  bool reply_on_final = false;
};

/// One replica's view of one instance space.
struct SpaceState {
  OwnerNumber owner;
  bool frozen = false;
  /// Owner number this replica committed to change to (stops participating).
  std::optional<OwnerNumber> changing;
  std::map<std::uint64_t, CommandRecord> slots;
  std::uint64_t next_slot = 0;
  Digest chain;
  std::uint64_t checkpoint = 0;
  std::map<std::uint64_t, SpecOrderMsg> buffered;
  std::map<std::uint64_t, std::vector<CommitEvidence>> early_commits;
  std::map<std::uint64_t, std::set<ReplicaIndex>> votes;  // keyed by suspected owner number
  std::set<std::uint64_t> voted;
  std::map<std::uint64_t, std::map<ReplicaIndex, OwnerChangeMsg>> collected;  // keyed by new owner
  std::set<std::uint64_t> announced;
  /// Retransmitted requests naming this space's owner as original recipient.
  std::vector<RequestMsg> retransmitted;
};

struct HistorySelection {
  std::uint64_t base = 0;
  std::vector<SafeInstance> safe;
};

/// Deterministic safe-history selection over a verified proof set for one
/// space. Entries whose signatures fail are treated as unproven.
HistorySelection select_history(const Verifier& verifier, ReplicaIndex space,
                                const std::vector<OwnerChangeMsg>& proof);

struct ReplicaCounters {
  std::size_t invalid_messages = 0;
  std::size_t spec_orders_buffered = 0;
  std::size_t buffer_drops = 0;
  std::size_t poms_verified = 0;
  std::size_t owner_changes = 0;
};

class Replica : public Node {
 public:
  Replica(ReplicaIndex index, ReplicaOptions opts, KeyPair key,
          std::shared_ptr<const crypto::KeyRegistry> keys);

  void receive(Context& ctx, NodeId from, const Message& m) override;
  void timer(Context& ctx, std::uint64_t id) override;

  /// Records `request` again at the next free slot of the own space and
  /// returns the SpecOrder without sending it; the own SpecReply for the new
  /// slot is sent to the client. Used by the equivocation strategy.
  std::optional<SpecOrderMsg> append_duplicate(Context& ctx, const RequestMsg& request);

  ReplicaIndex index() const { return index_; }
  const KeyPair& key() const { return key_; }
  const SpaceState& space(ReplicaIndex s) const { return spaces_.at(s); }
  const ExecutionEngine& engine() const { return engine_; }
  const ReplicaCounters& counters() const { return counters_; }
  const Verifier& verifier() const { return verifier_; }

 private:
  struct ClientCache {
    std::uint64_t t = 0;
    std::optional<Message> reply;
  };
  struct ResendWait {
    CommandId id;
    ReplicaIndex space;
  };
  struct BufferWait {
    ReplicaIndex space;
    std::uint64_t slot;
  };
  struct OwnerChangeWait {
    ReplicaIndex space;
    OwnerNumber target;
  };
  using TimerAction = std::variant<ResendWait, BufferWait, OwnerChangeWait>;

  void on_request(Context& ctx, const RequestMsg& m);
  void on_retransmission(Context& ctx, const RequestMsg& m);
  void on_resend_req(Context& ctx, const ResendReqMsg& m);
  void on_spec_order(Context& ctx, const SpecOrderMsg& m);
  void on_commit_fast(Context& ctx, const CommitFastMsg& m);
  void on_commit(Context& ctx, const CommitMsg& m);
  void on_pom(Context& ctx, const PomMsg& m);
  void on_start_owner_change(Context& ctx, const StartOwnerChangeMsg& m);
  void on_owner_change(Context& ctx, const OwnerChangeMsg& m);
  void on_new_owner(Context& ctx, const NewOwnerMsg& m);

  /// Orders a fresh request in the own space and broadcasts the SpecOrder.
  void order(Context& ctx, const RequestMsg& request);
  SpecOrderMsg record_own(Context& ctx, const RequestMsg& request);
  void accept_spec_order(Context& ctx, const SpecOrderMsg& m);
  void drain_buffer(Context& ctx, ReplicaIndex space);
  void apply_commit(Context& ctx, CommandRecord& rec, const CommitEvidence& e);
  void run_final(Context& ctx);

  void vote_owner_change(Context& ctx, ReplicaIndex space, OwnerNumber owner);
  void commit_to_change(Context& ctx, ReplicaIndex space, OwnerNumber owner);
  void maybe_announce(Context& ctx, ReplicaIndex space, OwnerNumber target);
  void apply_new_owner(Context& ctx, ReplicaIndex space, OwnerNumber owner,
                       const HistorySelection& g);
  void advance_checkpoint(SpaceState& sp);

  void send_spec_reply(Context& ctx, CommandRecord& rec);
  void send_commit_reply(Context& ctx, CommandRecord& rec);
  void remember_reply(NodeId client, std::uint64_t t, const Message& m);
  void note_request(const RequestMsg& r);

  /// Locally recorded instances whose command interferes with `cmd`.
  DepSet interfering(const Command& cmd, const InstanceId& except) const;
  void index_record(const CommandRecord& rec);
  void unindex_record(const CommandRecord& rec);
  CommandRecord* record(const InstanceId& inst);

  std::uint64_t arm(Context& ctx, TimerAction action, Time delay);
  std::uint32_t change_quorum() const;
  void broadcast(Context& ctx, const Message& m);

  ReplicaIndex index_;
  ReplicaOptions opts_;
  KeyPair key_;
  std::shared_ptr<const crypto::KeyRegistry> keys_;
  Verifier verifier_;
  std::vector<SpaceState> spaces_;
  ExecutionEngine engine_;
  std::map<NodeId, ClientCache> clients_;
  std::map<std::string, std::vector<InstanceId>> by_key_;
  std::map<CommandId, InstanceId> by_command_;
  std::map<CommandId, std::uint64_t> resend_timers_;
  std::map<std::uint64_t, TimerAction> timers_;
  std::uint64_t next_timer_ = 1;
  ReplicaCounters counters_;
};

}  // namespace ezbft
