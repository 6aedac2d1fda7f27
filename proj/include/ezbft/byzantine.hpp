#pragma once

#include <memory>
#include <set>

#include "ezbft/replica.hpp"
#include "ezbft/simnet.hpp"

namespace ezbft {

/// Named attack strategies layered over an otherwise correct replica.
/// Each wrapper filters or rewrites the inner replica's outbound traffic.
class ByzantineReplica : public Node {
 public:
  explicit ByzantineReplica(std::unique_ptr<Replica> inner) : inner_(std::move(inner)) {}
  Replica& replica() { return *inner_; }
  const Replica& replica() const { return *inner_; }

 protected:
  std::unique_ptr<Replica> inner_;
};

/// Drops every outbound message while `from <= now < until`.
class MuteReplica final : public ByzantineReplica {
 public:
  MuteReplica(std::unique_ptr<Replica> inner, Time from, Time until)
      : ByzantineReplica(std::move(inner)), from_(from), until_(until) {}

  void receive(Context& ctx, NodeId from, const Message& m) override;
  void timer(Context& ctx, std::uint64_t id) override;

 private:
  Time from_, until_;
};

/// Reports the leader's (D, S) in every SpecReply instead of its own D', S',
/// hiding the interfering commands it has seen.
class LieDepsReplica final : public ByzantineReplica {
 public:
  using ByzantineReplica::ByzantineReplica;

  void receive(Context& ctx, NodeId from, const Message& m) override;
  void timer(Context& ctx, std::uint64_t id) override;
};

/// As command-leader, orders each fresh request twice: slot s goes to every
/// replica, slot s+1 (same request) only to `second_group`.
class EquivocatingReplica final : public ByzantineReplica {
 public:
  EquivocatingReplica(std::unique_ptr<Replica> inner, std::set<ReplicaIndex> second_group,
                      std::size_t limit)
      : ByzantineReplica(std::move(inner)), second_(std::move(second_group)), limit_(limit) {}

  void receive(Context& ctx, NodeId from, const Message& m) override;
  void timer(Context& ctx, std::uint64_t id) override;

  std::size_t equivocations() const { return done_; }

 private:
  template <typename F>
  void run(Context& ctx, F&& f);

  std::set<ReplicaIndex> second_;
  std::size_t limit_;
  std::size_t done_ = 0;
  std::set<std::uint64_t> seen_slots_;
};

}  // namespace ezbft
