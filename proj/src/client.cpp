#include "ezbft/client.hpp"

#include <algorithm>

namespace ezbft {

namespace {

constexpr std::uint64_t kSlowTimer = 1;
constexpr std::uint64_t kRetransmitTimer = 2;

}  // namespace

Client::Client(NodeId id, ClientOptions opts, KeyPair key,
               std::shared_ptr<const crypto::KeyRegistry> keys)
    : id_(id),
      opts_(std::move(opts)),
      key_(std::move(key)),
      keys_(std::move(keys)),
      verifier_(*keys_, opts_.cluster),
      target_(opts_.home) {}

bool Client::submit(Context& ctx, const Command& cmd) {
  if (phase_ != Phase::idle) return false;
  request_ = RequestMsg{cmd, ++t_, id_, std::nullopt, {}};
  request_.sig = keys_->scheme().sign(key_, signing_payload(request_));
  digest_ = request_digest(request_);
  replies_.clear();
  commit_replies_.clear();
  commit_.reset();
  backoff_ = 1;
  pom_sent_ = false;
  phase_ = Phase::speculative_wait;
  submitted_ = ctx.now();
  ctx.note("submit", std::nullopt,
           "t=" + std::to_string(t_) + " cmd=" + command_token(cmd) + " target=R" +
               std::to_string(target_));
  ctx.set_depth(0);
  ctx.send(NodeId::replica(target_), request_);
  arm_timers(ctx);
  return true;
}

void Client::arm_timers(Context& ctx) {
  ctx.cancel_timer(generation_ << 2 | kSlowTimer);
  ctx.cancel_timer(generation_ << 2 | kRetransmitTimer);
  ++generation_;
  if (phase_ == Phase::speculative_wait)
    ctx.set_timer(generation_ << 2 | kSlowTimer, opts_.slow_timeout * backoff_);
  ctx.set_timer(generation_ << 2 | kRetransmitTimer, opts_.retransmit_timeout * backoff_);
}

void Client::receive(Context& ctx, NodeId from, const Message& m) {
  if (const auto* r = std::get_if<SpecReplyMsg>(&m)) {
    if (from == NodeId::replica(r->sender)) on_spec_reply(ctx, *r);
  } else if (const auto* c = std::get_if<CommitReplyMsg>(&m)) {
    on_commit_reply(ctx, from, *c);
  }
}

void Client::on_spec_reply(Context& ctx, const SpecReplyMsg& m) {
  if (m.client != id_) return;
  const bool current = phase_ != Phase::idle && m.t == t_ && m.request_digest == digest_;
  const bool late = m.t == last_t_ && m.request_digest == last_digest_ && last_t_ != 0;
  if (!current && !late) return;
  if (!verifier_.spec_reply(m)) return;

  if (!current) {
    // Completed request: only equivocation evidence is of interest.
    if (last_pom_sent_ || last_orders_.count(m.instance)) return;
    for (const auto& [inst, other] : last_orders_) {
      if (other.order.owner == m.order.owner) {
        PomMsg pom{m.order.owner, other, m};
        poms_.push_back(pom);
        ++poms_sent_;
        last_pom_sent_ = true;
        ctx.note("pom", m.instance, "other=" + inst.str());
        send_to_all(ctx, pom);
        return;
      }
    }
    last_orders_.emplace(m.instance, m);
    return;
  }

  auto& slot = replies_[m.instance];
  slot[m.sender] = StoredReply{m, ctx.depth()};
  check_pom(ctx, m);
  if (phase_ != Phase::speculative_wait) return;
  if (slot.size() < opts_.cluster.fast_quorum()) return;

  const auto& first = slot.begin()->second.msg;
  bool all = std::all_of(slot.begin(), slot.end(),
                         [&](const auto& kv) { return match_spec_replies(kv.second.msg, first); });
  if (!all) {
    // Every replica answered and they disagree: the fast path cannot succeed.
    try_slow(ctx);
    return;
  }
  CommitFastMsg cf{id_, m.instance, CommitCertificate{CertKind::fast, {}}};
  for (const auto& [sender, r] : slot) cf.cert.replies.push_back(r.msg);
  const Reply rep = first.rep;
  const InstanceId inst = m.instance;
  send_to_all(ctx, cf);
  deliver(ctx, CommitPath::fast, rep, inst, ctx.depth());
}

void Client::check_pom(Context& ctx, const SpecReplyMsg& m) {
  if (pom_sent_) return;
  for (const auto& [inst, by_sender] : replies_) {
    if (inst == m.instance) continue;
    for (const auto& [sender, r] : by_sender) {
      if (r.msg.order.owner != m.order.owner) continue;
      PomMsg pom{m.order.owner, r.msg, m};
      poms_.push_back(pom);
      ++poms_sent_;
      pom_sent_ = true;
      ctx.note("pom", m.instance, "other=" + inst.str());
      send_to_all(ctx, pom);
      return;
    }
  }
}

bool Client::try_slow(Context& ctx) {
  const std::uint32_t q = opts_.cluster.slow_quorum();
  const std::map<ReplicaIndex, StoredReply>* best = nullptr;
  InstanceId inst;
  for (const auto& [i, by_sender] : replies_)
    if (by_sender.size() >= q && (!best || by_sender.size() > best->size())) {
      best = &by_sender;
      inst = i;
    }
  if (!best) return false;

  // Designated quorum members first, then the rest by index.
  const auto leader = best->begin()->second.msg.order.owner.owner(opts_.cluster.n);
  std::vector<ReplicaIndex> picked;
  for (auto r : opts_.cluster.designated_quorum(leader))
    if (best->count(r) && picked.size() < q) picked.push_back(r);
  for (const auto& [sender, r] : *best)
    if (picked.size() < q && std::find(picked.begin(), picked.end(), sender) == picked.end())
      picked.push_back(sender);
  std::sort(picked.begin(), picked.end());

  CommitMsg c;
  c.client = id_;
  c.instance = inst;
  c.cert.kind = CertKind::slow;
  int depth = 0;
  for (auto r : picked) {
    const auto& stored = best->at(r);
    c.cert.replies.push_back(stored.msg);
    depth = std::max(depth, stored.depth);
  }
  std::tie(c.deps, c.seq) = combine(c.cert.replies);
  c.sig = keys_->scheme().sign(key_, signing_payload(c));
  commit_ = c;
  phase_ = Phase::slow_wait;
  ctx.note("slow", inst, "deps=" + to_string(c.deps) + " seq=" + std::to_string(c.seq.value));
  ctx.set_depth(depth);
  send_to_all(ctx, c);
  arm_timers(ctx);
  return true;
}

void Client::retransmit(Context& ctx) {
  ++retransmissions_;
  RequestMsg r = request_;
  r.original = target_;
  ctx.note("retransmit", std::nullopt, "t=" + std::to_string(t_) + " original=R" +
                                           std::to_string(target_));
  ctx.set_depth(0);
  send_to_all(ctx, r);
  backoff_ = std::min(backoff_ * 2, opts_.backoff_cap);
  arm_timers(ctx);
}

void Client::timer(Context& ctx, std::uint64_t id) {
  if ((id >> 2) != generation_ || phase_ == Phase::idle) return;
  if (phase_ == Phase::speculative_wait) {
    if (!try_slow(ctx)) retransmit(ctx);
    return;
  }
  if ((id & 3) == kRetransmitTimer && commit_) {
    int depth = 0;
    for (const auto& r : commit_->cert.replies)
      depth = std::max(depth, replies_[r.instance][r.sender].depth);
    ctx.set_depth(depth);
    send_to_all(ctx, *commit_);
    backoff_ = std::min(backoff_ * 2, opts_.backoff_cap);
    arm_timers(ctx);
  }
}

void Client::on_commit_reply(Context& ctx, NodeId from, const CommitReplyMsg& m) {
  if (!from.is_replica() || from.index >= opts_.cluster.n) return;
  if (phase_ == Phase::idle || m.client != id_ || m.t != t_) return;
  commit_replies_[from.index] = CommitTally{m.rep, m.instance};
  std::uint32_t same = 0;
  for (const auto& [sender, tally] : commit_replies_)
    if (tally.rep == m.rep) ++same;
  if (same >= opts_.cluster.slow_quorum()) deliver(ctx, CommitPath::slow, m.rep, m.instance, ctx.depth());
}

void Client::deliver(Context& ctx, CommitPath path, const Reply& rep, const InstanceId& inst,
                     int steps) {
  Delivery d{request_.id(), request_.command, rep, submitted_, ctx.now(), path, steps, inst};
  ctx.note("deliver", inst,
           "t=" + std::to_string(t_) + " rep=" + to_string(rep) +
               (path == CommitPath::fast ? " path=fast" : " path=slow") +
               " steps=" + std::to_string(steps) +
               " latency=" + std::to_string(d.delivered - d.submitted));
  phase_ = Phase::idle;
  ctx.cancel_timer(generation_ << 2 | kSlowTimer);
  ctx.cancel_timer(generation_ << 2 | kRetransmitTimer);
  ++generation_;

  last_t_ = t_;
  last_digest_ = digest_;
  last_pom_sent_ = pom_sent_;
  last_orders_.clear();
  for (const auto& [i, by_sender] : replies_)
    if (!by_sender.empty()) last_orders_.emplace(i, by_sender.begin()->second.msg);

  if (inst.space != target_ && inst.space < opts_.cluster.n) target_ = inst.space;
  deliveries_.push_back(d);
  if (on_deliver) on_deliver(ctx, deliveries_.back());
}

void Client::send_to_all(Context& ctx, const Message& m) {
  for (ReplicaIndex r = 0; r < opts_.cluster.n; ++r) ctx.send(NodeId::replica(r), m);
}

}  // namespace ezbft
