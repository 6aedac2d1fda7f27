#pragma once

#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "ezbft/codec.hpp"
#include "ezbft/context.hpp"

namespace ezbft {

/// One-way delay between two nodes, before jitter and fault delays.
using DelayFn = std::function<Time(NodeId from, NodeId to)>;

/// Scripted link behaviour attached to one node for a time window.
struct LinkFault {
  enum class Kind : std::uint8_t { drop, delay };
  Kind kind = Kind::drop;
  NodeId node;
  /// drop: probability per message in [0, 1].
  double probability = 1.0;
  /// delay: added to every affected message.
  Time extra = 0;
  Time from = 0;
  Time until = INT64_MAX;
  /// Also affect messages addressed to the node, not only those it sends.
  bool inbound = false;
};

struct SimStats {
  std::size_t sent = 0;
  std::size_t delivered = 0;
  std::size_t dropped = 0;
  std::size_t timers_fired = 0;
  std::map<std::string, std::size_t> sent_by_kind;
};

/// Deterministic discrete-event network. Events run in (time, insertion
/// order); links are FIFO; all randomness comes from one seeded generator.
class Simulator {
 public:
  explicit Simulator(std::uint64_t seed);

  void add_node(NodeId id, std::unique_ptr<Node> node);
  Node* node(NodeId id) const;

  void set_delay(DelayFn fn, Time jitter = 0);
  void crash(NodeId id, Time at) { crashes_[id] = at; }
  void add_fault(const LinkFault& f) { faults_.push_back(f); }

  /// Trace header line; written before the first event.
  void header(const std::string& line);
  /// Called with every trace line as it is produced.
  void set_observer(std::function<void(const std::string&)> fn) { observer_ = std::move(fn); }

  /// Runs until the queue drains or virtual time would pass `limit`.
  /// Returns the time of the last processed event.
  Time run(Time limit);

  Time now() const { return now_; }
  bool crashed(NodeId id) const;
  const std::string& trace() const { return trace_; }
  Digest trace_digest() const { return crypto::digest(trace_); }
  const SimStats& stats() const { return stats_; }

 private:
  class NodeContext;
  friend class NodeContext;

  struct Event {
    Time time = 0;
    std::uint64_t seq = 0;
    enum class Kind : std::uint8_t { start, deliver, timer } kind = Kind::start;
    NodeId to;
    NodeId from;
    std::shared_ptr<const Bytes> bytes;
    int depth = 0;
    std::uint64_t timer_id = 0;
    std::uint64_t generation = 0;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void push(Event e);
  void emit(const std::string& line);
  void send(NodeId from, NodeId to, const Message& m, int depth);
  void dispatch(const Event& e);
  std::uint64_t draw(std::uint64_t bound);

  std::mt19937_64 rng_;
  Time now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::map<NodeId, std::unique_ptr<Node>> nodes_;
  std::map<NodeId, Time> crashes_;
  std::vector<LinkFault> faults_;
  DelayFn delay_;
  Time jitter_ = 0;
  std::map<std::pair<NodeId, NodeId>, Time> link_tail_;
  std::map<std::pair<NodeId, std::uint64_t>, std::uint64_t> timers_;
  std::uint64_t timer_generation_ = 0;
  std::string trace_;
  std::function<void(const std::string&)> observer_;
  SimStats stats_;
  bool started_ = false;
};

/// Context decorator; subclasses override what they intercept.
class ForwardingContext : public Context {
 public:
  explicit ForwardingContext(Context& inner) : inner_(inner) {}

  Time now() const override { return inner_.now(); }
  NodeId self() const override { return inner_.self(); }
  void send(NodeId to, const Message& m) override { inner_.send(to, m); }
  void set_timer(std::uint64_t id, Time delay) override { inner_.set_timer(id, delay); }
  void cancel_timer(std::uint64_t id) override { inner_.cancel_timer(id); }
  void note(std::string_view kind, std::optional<InstanceId> inst,
            std::string_view detail) override {
    inner_.note(kind, inst, detail);
  }
  int depth() const override { return inner_.depth(); }
  void set_depth(int d) override { inner_.set_depth(d); }

 protected:
  Context& inner_;
};

}  // namespace ezbft
