#include "ezbft/byzantine.hpp"

#include <vector>

namespace ezbft {

namespace {

class MuteContext final : public ForwardingContext {
 public:
  MuteContext(Context& inner, Time from, Time until)
      : ForwardingContext(inner), from_(from), until_(until) {}

  void send(NodeId to, const Message& m) override {
    if (now() >= from_ && now() < until_) {
      note("mute", instance_of(m), std::string(kind_name(m)) + " to=" + to.str());
      return;
    }
    inner_.send(to, m);
  }

 private:
  Time from_, until_;
};

class LieContext final : public ForwardingContext {
 public:
  LieContext(Context& inner, const Replica& r) : ForwardingContext(inner), r_(r) {}

  void send(NodeId to, const Message& m) override {
    const auto* reply = std::get_if<SpecReplyMsg>(&m);
    if (!reply || (reply->deps == reply->order.deps && reply->seq == reply->order.seq)) {
      inner_.send(to, m);
      return;
    }
    SpecReplyMsg lie = *reply;
    lie.deps = lie.order.deps;
    lie.seq = lie.order.seq;
    lie.sig = r_.verifier().keys().scheme().sign(r_.key(), signing_payload(lie));
    note("lie", lie.instance, "deps=" + to_string(reply->deps) + "->" + to_string(lie.deps));
    inner_.send(to, lie);
  }

 private:
  const Replica& r_;
};

class CaptureContext final : public ForwardingContext {
 public:
  using ForwardingContext::ForwardingContext;
  void send(NodeId to, const Message& m) override { out.emplace_back(to, m); }
  std::vector<std::pair<NodeId, Message>> out;
};

}  // namespace

void MuteReplica::receive(Context& ctx, NodeId from, const Message& m) {
  MuteContext mc(ctx, from_, until_);
  inner_->receive(mc, from, m);
}

void MuteReplica::timer(Context& ctx, std::uint64_t id) {
  MuteContext mc(ctx, from_, until_);
  inner_->timer(mc, id);
}

void LieDepsReplica::receive(Context& ctx, NodeId from, const Message& m) {
  LieContext lc(ctx, *inner_);
  inner_->receive(lc, from, m);
}

void LieDepsReplica::timer(Context& ctx, std::uint64_t id) {
  LieContext lc(ctx, *inner_);
  inner_->timer(lc, id);
}

template <typename F>
void EquivocatingReplica::run(Context& ctx, F&& f) {
  CaptureContext cap(ctx);
  f(cap);
  const ReplicaIndex self = inner_->index();

  // A fresh own-space slot seen for the first time marks a new ordering.
  std::vector<RequestMsg> fresh;
  for (const auto& [to, m] : cap.out) {
    const auto* so = std::get_if<SpecOrderMsg>(&m);
    if (!so || so->order.instance.space != self) continue;
    if (seen_slots_.insert(so->order.instance.slot).second) fresh.push_back(so->request);
  }
  for (const auto& [to, m] : cap.out) ctx.send(to, m);

  for (const auto& request : fresh) {
    if (done_ >= limit_) break;
    CaptureContext dup(ctx);
    auto second = inner_->append_duplicate(dup, request);
    if (!second) break;
    ++done_;
    seen_slots_.insert(second->order.instance.slot);
    ctx.note("equivocate", second->order.instance, "first=R" + std::to_string(self) + "." +
                                                       std::to_string(second->order.instance.slot - 1));
    for (auto r : second_) ctx.send(NodeId::replica(r), *second);
    for (const auto& [to, m] : dup.out) ctx.send(to, m);
  }
}

void EquivocatingReplica::receive(Context& ctx, NodeId from, const Message& m) {
  run(ctx, [&](Context& c) { inner_->receive(c, from, m); });
}

void EquivocatingReplica::timer(Context& ctx, std::uint64_t id) {
  run(ctx, [&](Context& c) { inner_->timer(c, id); });
}

}  // namespace ezbft
