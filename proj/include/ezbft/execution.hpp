#pragma once

#include <map>
#include <set>
#include <vector>

#include "ezbft/messages.hpp"

namespace ezbft {

/// Payload of one dependency-graph node. An edge a -> b means b is in deps(a);
/// edges to ids absent from the graph are ignored.
struct GraphNode {
  DepSet deps;
  SeqNo seq;
};

using DepGraph = std::map<InstanceId, GraphNode>;

/// Strongly connected components, each sorted by InstanceId. Iterative
/// Tarjan; the order of the returned components is unspecified.
std::vector<std::vector<InstanceId>> strongly_connected(const DepGraph& g);

/// Canonical execution order: components dependencies-first, ties between
/// independent components broken by their smallest (seq, space, slot) member,
/// members of one component ordered by (seq, space, slot).
std::vector<InstanceId> linearize(const DepGraph& g);

enum class RollbackMode : std::uint8_t {
  /// Undo back to the earliest speculative entry touching a finalized key.
  partial,
  /// Undo every speculative entry before each final batch (reference mode).
  full,
};

struct FinalExecution {
  InstanceId instance;
  CommandId id;
  Command command;
  Reply reply;
  /// Same command already final at another instance; state untouched.
  bool duplicate = false;
};

/// Per-replica execution: speculative application in arrival order and final
/// application in linearization order once a committed instance's transitive
/// dependencies are all committed.
class ExecutionEngine {
 public:
  explicit ExecutionEngine(RollbackMode mode = RollbackMode::partial) : mode_(mode) {}

  /// Records a new instance and applies it speculatively to the latest state.
  /// A command already executed (in either mode) returns its earlier reply.
  Reply speculate(const InstanceId& inst, const CommandId& id, const Command& cmd,
                  const DepSet& deps, SeqNo seq);

  /// Fixes the final metadata. Records the instance if it was unknown.
  void commit(const InstanceId& inst, const CommandId& id, const Command& cmd, DepSet deps,
              SeqNo seq);

  /// Drops non-final instances: their speculative effects are undone and
  /// dependencies on them are ignored from now on.
  void invalidate(const std::set<InstanceId>& instances);

  /// Instances of `space` at or beyond slot `end` that are not recorded
  /// count as void (the space was frozen with `end` slots).
  void seal(ReplicaIndex space, std::uint64_t end) { sealed_[space] = end; }

  bool ready_for_final(const InstanceId& inst) const;

  /// Final-executes every ready instance, in linearization order.
  std::vector<FinalExecution> execute_ready();

  bool known(const InstanceId& inst) const { return nodes_.count(inst) > 0; }
  bool is_committed(const InstanceId& inst) const;
  bool is_final(const InstanceId& inst) const;
  bool is_void(const InstanceId& inst) const;
  std::optional<Reply> final_reply(const CommandId& id) const;

  /// Every final execution so far, duplicates included.
  const std::vector<InstanceId>& final_order() const { return final_order_; }
  const KVState& state() const { return state_; }
  /// Rewinds that discarded or changed a speculative result.
  std::size_t rollback_count() const { return rollbacks_; }
  std::size_t speculative_depth() const { return spec_log_.size(); }

 private:
  enum class Stage : std::uint8_t { pending, committed, final };

  struct Node {
    CommandId id;
    Command command;
    DepSet deps;
    SeqNo seq;
    Stage stage = Stage::pending;
  };

  struct SpecEntry {
    InstanceId instance;
    CommandId id;
    Command command;
    Reply reply;
  };

  /// Undo spec entries from `from` on, run `between`, then re-apply the
  /// survivors that `keep` accepts. Counts a rollback when `between` reports
  /// a divergence or a survivor's reply changes.
  template <typename Between, typename Keep>
  void rewind(std::size_t from, Between between, Keep keep);

  RollbackMode mode_;
  KVState state_;
  std::map<InstanceId, Node> nodes_;
  std::set<InstanceId> open_;  // committed, not yet final
  std::set<InstanceId> voided_;
  std::map<ReplicaIndex, std::uint64_t> sealed_;
  std::vector<SpecEntry> spec_log_;  // aligned 1:1 with the state's undo log
  std::map<CommandId, Reply> final_replies_;
  std::vector<InstanceId> final_order_;
  std::size_t rollbacks_ = 0;
};

}  // namespace ezbft
