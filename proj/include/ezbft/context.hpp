#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "ezbft/messages.hpp"

namespace ezbft {

/// Virtual time in microseconds.
using Time = std::int64_t;
constexpr Time kMillisecond = 1000;

/// Services a hosted state machine may use while handling one event. Every
/// handler runs atomically; nothing here blocks.
class Context {
 public:
  virtual ~Context() = default;

  virtual Time now() const = 0;
  virtual NodeId self() const = 0;

  virtual void send(NodeId to, const Message& m) = 0;

  /// Arms timer `id` to fire after `delay`; re-arming replaces the old deadline.
  virtual void set_timer(std::uint64_t id, Time delay) = 0;
  virtual void cancel_timer(std::uint64_t id) = 0;

  /// Local protocol event for the trace ("commit", "final", "deliver", ...).
  virtual void note(std::string_view kind, std::optional<InstanceId> inst,
                    std::string_view detail) = 0;

  /// Causal message depth of the event being handled: 0 for timers and
  /// starts, otherwise the depth of the delivered message. Messages sent from
  /// this handler carry depth() + 1 unless set_depth() rebased it.
  virtual int depth() const = 0;
  virtual void set_depth(int d) = 0;
};

/// A protocol participant hosted by the simulator.
class Node {
 public:
  virtual ~Node() = default;

  virtual void start(Context&) {}
  virtual void receive(Context& ctx, NodeId from, const Message& m) = 0;
  virtual void timer(Context& ctx, std::uint64_t id) = 0;
};

}  // namespace ezbft
