#include "ezbft/simnet.hpp"

#include <sstream>

namespace ezbft {

class Simulator::NodeContext final : public Context {
 public:
  NodeContext(Simulator& sim, NodeId self, int depth) : sim_(sim), self_(self), depth_(depth) {}

  Time now() const override { return sim_.now_; }
  NodeId self() const override { return self_; }

  void send(NodeId to, const Message& m) override { sim_.send(self_, to, m, base_ + 1); }

  void set_timer(std::uint64_t id, Time delay) override {
    const std::uint64_t gen = ++sim_.timer_generation_;
    sim_.timers_[{self_, id}] = gen;
    Event e;
    e.time = sim_.now_ + std::max<Time>(delay, 0);
    e.kind = Event::Kind::timer;
    e.to = self_;
    e.from = self_;
    e.timer_id = id;
    e.generation = gen;
    sim_.push(std::move(e));
  }

  void cancel_timer(std::uint64_t id) override { sim_.timers_.erase({self_, id}); }

  void note(std::string_view kind, std::optional<InstanceId> inst,
            std::string_view detail) override {
    std::string line = std::to_string(sim_.now_);
    line += ' ';
    line += kind;
    line += ' ' + self_.str() + " - - " + (inst ? inst->str() : std::string("-"));
    if (!detail.empty()) {
      line += ' ';
      line += detail;
    }
    sim_.emit(line);
  }

  int depth() const override { return depth_; }
  void set_depth(int d) override { base_ = d; }

 private:
  Simulator& sim_;
  NodeId self_;
  int depth_;
  int base_ = depth_;
};

Simulator::Simulator(std::uint64_t seed) : rng_(seed) {
  delay_ = [](NodeId, NodeId) { return Time{0}; };
}

void Simulator::add_node(NodeId id, std::unique_ptr<Node> node) { nodes_[id] = std::move(node); }

Node* Simulator::node(NodeId id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : it->second.get();
}

void Simulator::set_delay(DelayFn fn, Time jitter) {
  delay_ = std::move(fn);
  jitter_ = jitter;
}

void Simulator::header(const std::string& line) { emit("# " + line); }

bool Simulator::crashed(NodeId id) const {
  auto it = crashes_.find(id);
  return it != crashes_.end() && now_ >= it->second;
}

void Simulator::push(Event e) {
  e.seq = next_seq_++;
  queue_.push(std::move(e));
}

void Simulator::emit(const std::string& line) {
  trace_ += line;
  trace_ += '\n';
  if (observer_) observer_(line);
}

// Raw generator output reduced by modulo: identical on every platform,
// unlike the standard distributions.
std::uint64_t Simulator::draw(std::uint64_t bound) { return bound == 0 ? 0 : rng_() % bound; }

void Simulator::send(NodeId from, NodeId to, const Message& m, int depth) {
  auto bytes = std::make_shared<const Bytes>(encode(m));
  const auto inst = instance_of(m);
  const std::string kind(kind_name(m));
  const std::string where = inst ? inst->str() : std::string("-");
  ++stats_.sent;
  ++stats_.sent_by_kind[kind];

  Time extra = 0;
  bool dropped = false;
  for (const auto& f : faults_) {
    if (now_ < f.from || now_ >= f.until) continue;
    if (!(f.node == from || (f.inbound && f.node == to))) continue;
    if (f.kind == LinkFault::Kind::delay) {
      extra += f.extra;
    } else if (f.probability >= 1.0 ||
               draw(1'000'000) < static_cast<std::uint64_t>(f.probability * 1'000'000)) {
      dropped = true;
    }
  }

  std::ostringstream line;
  line << now_ << (dropped ? " drop " : " send ") << from.str() << ' ' << to.str() << ' ' << kind
       << ' ' << where << " depth=" << depth << " bytes=" << bytes->size();
  emit(line.str());
  if (dropped) {
    ++stats_.dropped;
    return;
  }

  Time d = std::max<Time>(delay_(from, to), 0) + extra;
  if (jitter_ > 0) d += static_cast<Time>(draw(static_cast<std::uint64_t>(jitter_) + 1));
  Time at = now_ + d;
  auto& tail = link_tail_[{from, to}];
  at = std::max(at, tail);
  tail = at;

  Event e;
  e.time = at;
  e.kind = Event::Kind::deliver;
  e.to = to;
  e.from = from;
  e.bytes = std::move(bytes);
  e.depth = depth;
  push(std::move(e));
}

void Simulator::dispatch(const Event& e) {
  if (crashed(e.to)) return;
  Node* n = node(e.to);
  if (!n) return;
  switch (e.kind) {
    case Event::Kind::start: {
      NodeContext ctx(*this, e.to, 0);
      n->start(ctx);
      break;
    }
    case Event::Kind::timer: {
      auto it = timers_.find({e.to, e.timer_id});
      if (it == timers_.end() || it->second != e.generation) return;
      timers_.erase(it);
      ++stats_.timers_fired;
      NodeContext ctx(*this, e.to, 0);
      n->timer(ctx, e.timer_id);
      break;
    }
    case Event::Kind::deliver: {
      auto m = decode(*e.bytes);
      const std::string kind = m ? std::string(kind_name(*m)) : std::string("?");
      const auto inst = m ? instance_of(*m) : std::nullopt;
      emit(std::to_string(now_) + " recv " + e.from.str() + ' ' + e.to.str() + ' ' + kind + ' ' +
           (inst ? inst->str() : std::string("-")) + " depth=" + std::to_string(e.depth));
      ++stats_.delivered;
      if (!m) return;
      NodeContext ctx(*this, e.to, e.depth);
      n->receive(ctx, e.from, *m);
      break;
    }
  }
}

Time Simulator::run(Time limit) {
  if (!started_) {
    started_ = true;
    for (const auto& [id, n] : nodes_) {
      Event e;
      e.time = 0;
      e.kind = Event::Kind::start;
      e.to = id;
      push(std::move(e));
    }
  }
  while (!queue_.empty()) {
    if (queue_.top().time > limit) break;
    Event e = queue_.top();
    queue_.pop();
    now_ = e.time;
    dispatch(e);
  }
  return now_;
}

}  // namespace ezbft
