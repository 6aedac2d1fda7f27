#include "ezbft/replica.hpp"

#include <algorithm>

namespace ezbft {

namespace {

std::string command_detail(const RequestMsg& r) {
  return "c=" + r.client.str() + " t=" + std::to_string(r.t) + " cmd=" + command_token(r.command);
}

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

Replica::Replica(ReplicaIndex index, ReplicaOptions opts, KeyPair key,
                 std::shared_ptr<const crypto::KeyRegistry> keys)
    : index_(index),
      opts_(std::move(opts)),
      key_(std::move(key)),
      keys_(std::move(keys)),
      verifier_(*keys_, opts_.cluster),
      spaces_(opts_.cluster.n),
      engine_(opts_.rollback) {
  // Space i starts at owner number i so that its owner is i mod N.
  for (ReplicaIndex s = 0; s < spaces_.size(); ++s) spaces_[s].owner = OwnerNumber{s};
}

void Replica::receive(Context& ctx, NodeId from, const Message& m) {
  std::visit(Overloaded{
                 [&](const RequestMsg& r) {
                   if (from == r.client) on_request(ctx, r);
                 },
                 [&](const SpecOrderMsg& so) {
                   if (from.is_replica()) on_spec_order(ctx, so);
                 },
                 [&](const SpecReplyMsg&) {},
                 [&](const CommitFastMsg& c) { on_commit_fast(ctx, c); },
                 [&](const CommitMsg& c) {
                   if (from == c.client) on_commit(ctx, c);
                 },
                 [&](const CommitReplyMsg&) {},
                 [&](const ResendReqMsg& r) {
                   if (from == NodeId::replica(r.sender)) on_resend_req(ctx, r);
                 },
                 [&](const PomMsg& p) { on_pom(ctx, p); },
                 [&](const StartOwnerChangeMsg& s) {
                   if (from == NodeId::replica(s.sender)) on_start_owner_change(ctx, s);
                 },
                 [&](const OwnerChangeMsg& o) {
                   if (from == NodeId::replica(o.sender)) on_owner_change(ctx, o);
                 },
                 [&](const NewOwnerMsg& n) {
                   if (from == NodeId::replica(n.sender)) on_new_owner(ctx, n);
                 },
             },
             m);
}

void Replica::timer(Context& ctx, std::uint64_t id) {
  auto it = timers_.find(id);
  if (it == timers_.end()) return;
  TimerAction action = it->second;
  timers_.erase(it);
  std::visit(Overloaded{
                 [&](const ResendWait& w) {
                   resend_timers_.erase(w.id);
                   if (by_command_.count(w.id)) return;
                   auto& sp = spaces_[w.space];
                   if (sp.frozen) return;
                   vote_owner_change(ctx, w.space, sp.owner);
                 },
                 [&](const BufferWait& w) {
                   auto& sp = spaces_[w.space];
                   if (!sp.buffered.count(w.slot)) return;
                   counters_.buffer_drops += sp.buffered.size();
                   sp.buffered.clear();
                   if (!sp.frozen && !sp.changing) vote_owner_change(ctx, w.space, sp.owner);
                 },
                 [&](const OwnerChangeWait& w) {
                   auto& sp = spaces_[w.space];
                   if (sp.owner >= w.target) return;
                   // The prospective owner stalled; move on to the next one.
                   vote_owner_change(ctx, w.space, w.target);
                   commit_to_change(ctx, w.space, w.target);
                 },
             },
             action);
}

// --- request handling ---------------------------------------------------------

void Replica::on_request(Context& ctx, const RequestMsg& m) {
  if (!verifier_.request(m)) {
    ++counters_.invalid_messages;
    return;
  }
  if (m.original) {
    on_retransmission(ctx, m);
    return;
  }
  auto& cc = clients_[m.client];
  if (m.t <= cc.t) {
    if (m.t == cc.t && cc.reply) ctx.send(m.client, *cc.reply);
    return;
  }
  const auto& own = spaces_[index_];
  if (own.frozen || own.changing) return;
  order(ctx, m);
}

void Replica::on_retransmission(Context& ctx, const RequestMsg& m) {
  auto& cc = clients_[m.client];
  if (m.t <= cc.t) {
    if (m.t == cc.t && cc.reply) ctx.send(m.client, *cc.reply);
    return;
  }
  const ReplicaIndex ri = *m.original;
  if (ri >= opts_.cluster.n) return;
  RequestMsg base = m.base_form();
  auto& sp = spaces_[ri];
  const bool seen = std::any_of(sp.retransmitted.begin(), sp.retransmitted.end(),
                                [&](const RequestMsg& r) { return r.id() == base.id(); });
  if (!seen) sp.retransmitted.push_back(base);

  const auto& own = spaces_[index_];
  const bool can_order = !own.frozen && !own.changing;
  if (ri == index_ || (sp.frozen && sp.owner.owner(opts_.cluster.n) == index_)) {
    if (can_order) order(ctx, base);
    return;
  }
  if (sp.frozen || resend_timers_.count(base.id())) return;
  ctx.send(NodeId::replica(ri), ResendReqMsg{m, index_});
  resend_timers_[base.id()] = arm(ctx, ResendWait{base.id(), ri}, opts_.resend_timeout);
}

void Replica::on_resend_req(Context& ctx, const ResendReqMsg& m) {
  if (!verifier_.request(m.request)) {
    ++counters_.invalid_messages;
    return;
  }
  RequestMsg base = m.request.base_form();
  if (auto it = by_command_.find(base.id()); it != by_command_.end() && it->second.space == index_) {
    const auto& rec = spaces_[index_].slots.at(it->second.slot);
    ctx.send(NodeId::replica(m.sender), SpecOrderMsg{rec.order, rec.request});
    return;
  }
  if (base.t <= clients_[base.client].t) return;
  const auto& own = spaces_[index_];
  if (own.frozen || own.changing) return;
  order(ctx, base);
}

void Replica::order(Context& ctx, const RequestMsg& request) {
  SpecOrderMsg so = record_own(ctx, request.base_form());
  broadcast(ctx, so);
  send_spec_reply(ctx, spaces_[index_].slots.at(so.order.instance.slot));
}

SpecOrderMsg Replica::record_own(Context& ctx, const RequestMsg& request) {
  auto& sp = spaces_[index_];
  InstanceId inst{index_, sp.next_slot};
  DepSet deps = interfering(request.command, inst);
  std::uint64_t top = 0;
  for (const auto& d : deps)
    if (auto* r = record(d)) top = std::max(top, r->seq.value);

  SpecOrderCore core;
  core.owner = sp.owner;
  core.instance = inst;
  core.deps = deps;
  core.seq = SeqNo{top + 1};
  core.request_digest = request_digest(request);
  core.space_digest = chain_digest(sp.chain, core);
  core.sig = keys_->scheme().sign(key_, signing_payload(core));
  sp.chain = core.space_digest;
  ++sp.next_slot;

  CommandRecord rec;
  rec.instance = inst;
  rec.request = request;
  rec.order = core;
  rec.deps = core.deps;
  rec.seq = core.seq;
  rec.spec_rep = engine_.speculate(inst, request.id(), request.command, rec.deps, rec.seq);
  rec.status = CommandStatus::spec_executed;
  note_request(request);
  auto& stored = sp.slots[inst.slot] = std::move(rec);
  index_record(stored);
  ctx.note("order", inst, command_detail(request) + " deps=" + to_string(deps) +
                              " seq=" + std::to_string(core.seq.value));
  return SpecOrderMsg{core, request};
}

std::optional<SpecOrderMsg> Replica::append_duplicate(Context& ctx, const RequestMsg& request) {
  const auto& own = spaces_[index_];
  if (own.frozen || own.changing) return std::nullopt;
  SpecOrderMsg so = record_own(ctx, request.base_form());
  send_spec_reply(ctx, spaces_[index_].slots.at(so.order.instance.slot));
  return so;
}

// --- ordering -------------------------------------------------------------------

void Replica::on_spec_order(Context& ctx, const SpecOrderMsg& m) {
  const ReplicaIndex s = m.order.instance.space;
  if (s >= opts_.cluster.n) return;
  if (!verifier_.spec_order(m)) {
    ++counters_.invalid_messages;
    return;
  }
  auto& sp = spaces_[s];
  if (sp.owner.owner(opts_.cluster.n) == index_) return;
  if (sp.frozen || sp.changing || m.order.owner != sp.owner) return;

  const std::uint64_t slot = m.order.instance.slot;
  if (slot < sp.next_slot) {
    auto it = sp.slots.find(slot);
    if (it != sp.slots.end() && it->second.order.request_digest != m.order.request_digest)
      vote_owner_change(ctx, s, sp.owner);  // two signed orders for one slot
    return;
  }
  if (slot > sp.next_slot) {
    if (sp.buffered.size() >= opts_.buffer_limit) {
      ++counters_.buffer_drops;
      vote_owner_change(ctx, s, sp.owner);
      return;
    }
    if (sp.buffered.emplace(slot, m).second) {
      ++counters_.spec_orders_buffered;
      arm(ctx, BufferWait{s, slot}, opts_.buffer_timeout);
    }
    return;
  }
  accept_spec_order(ctx, m);
  drain_buffer(ctx, s);
}

void Replica::accept_spec_order(Context& ctx, const SpecOrderMsg& m) {
  const auto& core = m.order;
  const ReplicaIndex s = core.instance.space;
  auto& sp = spaces_[s];
  if (chain_digest(sp.chain, core) != core.space_digest) {
    ++counters_.invalid_messages;
    vote_owner_change(ctx, s, sp.owner);
    return;
  }
  sp.chain = core.space_digest;
  sp.next_slot = core.instance.slot + 1;

  RequestMsg request = m.request.base_form();
  DepSet deps = core.deps;
  SeqNo seq = core.seq;
  DepSet local = interfering(request.command, core.instance);
  if (!std::includes(deps.begin(), deps.end(), local.begin(), local.end())) {
    deps.insert(local.begin(), local.end());
    std::uint64_t top = 0;
    for (const auto& d : deps)
      if (auto* r = record(d)) top = std::max(top, r->seq.value);
    seq = std::max(seq, SeqNo{top + 1});
  }

  CommandRecord rec;
  rec.instance = core.instance;
  rec.request = request;
  rec.order = core;
  rec.deps = deps;
  rec.seq = seq;
  rec.spec_rep = engine_.speculate(core.instance, request.id(), request.command, deps, seq);
  rec.status = CommandStatus::spec_executed;
  note_request(request);
  auto& stored = sp.slots[core.instance.slot] = std::move(rec);
  index_record(stored);

  if (auto t = resend_timers_.find(request.id()); t != resend_timers_.end()) {
    ctx.cancel_timer(t->second);
    timers_.erase(t->second);
    resend_timers_.erase(t);
  }
  send_spec_reply(ctx, stored);

  if (auto e = sp.early_commits.find(core.instance.slot); e != sp.early_commits.end()) {
    auto pending = std::move(e->second);
    sp.early_commits.erase(e);
    for (const auto& ev : pending) apply_commit(ctx, stored, ev);
    run_final(ctx);
  }
}

void Replica::drain_buffer(Context& ctx, ReplicaIndex space) {
  auto& sp = spaces_[space];
  while (!sp.buffered.empty()) {
    auto it = sp.buffered.begin();
    if (it->first < sp.next_slot) {
      sp.buffered.erase(it);
      continue;
    }
    if (it->first != sp.next_slot || sp.frozen || sp.changing) break;
    SpecOrderMsg m = std::move(it->second);
    sp.buffered.erase(it);
    accept_spec_order(ctx, m);
  }
}

// --- commit -----------------------------------------------------------------------

void Replica::on_commit_fast(Context& ctx, const CommitFastMsg& m) {
  if (!verifier_.commit_fast(m)) {
    ++counters_.invalid_messages;
    return;
  }
  if (auto* rec = record(m.instance)) {
    apply_commit(ctx, *rec, m);
    run_final(ctx);
  } else if (m.instance.space < spaces_.size()) {
    auto& early = spaces_[m.instance.space].early_commits[m.instance.slot];
    if (early.size() < 4) early.emplace_back(m);
  }
}

void Replica::on_commit(Context& ctx, const CommitMsg& m) {
  if (!verifier_.commit(m)) {
    ++counters_.invalid_messages;
    return;
  }
  if (auto* rec = record(m.instance)) {
    apply_commit(ctx, *rec, m);
    run_final(ctx);
  } else if (m.instance.space < spaces_.size()) {
    auto& early = spaces_[m.instance.space].early_commits[m.instance.slot];
    if (early.size() < 4) early.emplace_back(m);
  }
}

void Replica::apply_commit(Context& ctx, CommandRecord& rec, const CommitEvidence& e) {
  if (evidence_digest(e) != rec.order.request_digest) return;
  const bool slow = std::holds_alternative<CommitMsg>(e);
  if (slow) rec.reply_on_final = true;
  if (is_committed(rec.status)) {
    if (slow && rec.status == CommandStatus::final_executed) send_commit_reply(ctx, rec);
    return;
  }
  auto [deps, seq] = evidence_metadata(e);
  rec.deps = std::move(deps);
  rec.seq = seq;
  rec.commit = e;
  rec.status = slow ? CommandStatus::committed_slow : CommandStatus::committed_fast;
  engine_.commit(rec.instance, rec.request.id(), rec.request.command, rec.deps, rec.seq);
  ctx.note("commit", rec.instance,
           command_detail(rec.request) + " deps=" + to_string(rec.deps) +
               " seq=" + std::to_string(rec.seq.value) + (slow ? " path=slow" : " path=fast"));
}

void Replica::run_final(Context& ctx) {
  for (const auto& fe : engine_.execute_ready()) {
    auto* rec = record(fe.instance);
    if (!rec) continue;
    rec->status = CommandStatus::final_executed;
    rec->final_rep = fe.reply;
    ctx.note("final", fe.instance,
             command_detail(rec->request) + " rep=" + to_string(fe.reply) +
                 (fe.duplicate ? " dup=1" : " dup=0"));
    if (rec->reply_on_final) send_commit_reply(ctx, *rec);
  }
}

// --- owner change -------------------------------------------------------------------

void Replica::on_pom(Context& ctx, const PomMsg& m) {
  if (!verifier_.pom(m)) {
    ++counters_.invalid_messages;
    return;
  }
  const ReplicaIndex s = m.first.order.instance.space;
  auto& sp = spaces_[s];
  if (m.owner != sp.owner || sp.frozen) return;
  ++counters_.poms_verified;
  ctx.note("pom", m.first.instance, "owner=" + std::to_string(m.owner.value) + " other=" +
                                        m.second.instance.str());
  vote_owner_change(ctx, s, m.owner);
  commit_to_change(ctx, s, m.owner);
}

void Replica::vote_owner_change(Context& ctx, ReplicaIndex space, OwnerNumber owner) {
  auto& sp = spaces_[space];
  if (owner < sp.owner || !sp.voted.insert(owner.value).second) return;
  StartOwnerChangeMsg msg{space, owner, index_, {}};
  msg.sig = keys_->scheme().sign(key_, signing_payload(msg));
  ctx.note("suspect", std::nullopt,
           "space=R" + std::to_string(space) + " owner=" + std::to_string(owner.value));
  broadcast(ctx, msg);
  auto& votes = sp.votes[owner.value];
  votes.insert(index_);
  if (votes.size() >= opts_.cluster.weak_quorum()) commit_to_change(ctx, space, owner);
}

void Replica::on_start_owner_change(Context& ctx, const StartOwnerChangeMsg& m) {
  if (!verifier_.start_owner_change(m)) {
    ++counters_.invalid_messages;
    return;
  }
  auto& sp = spaces_[m.suspect];
  if (m.owner < sp.owner) return;
  auto& votes = sp.votes[m.owner.value];
  votes.insert(m.sender);
  if (votes.size() >= opts_.cluster.weak_quorum()) {
    vote_owner_change(ctx, m.suspect, m.owner);
    commit_to_change(ctx, m.suspect, m.owner);
  }
}

void Replica::advance_checkpoint(SpaceState& sp) {
  const std::uint64_t k = opts_.checkpoint_interval;
  if (k == 0) return;
  for (;;) {
    bool done = true;
    for (std::uint64_t s = sp.checkpoint; s < sp.checkpoint + k; ++s) {
      auto it = sp.slots.find(s);
      if (it == sp.slots.end() || it->second.status != CommandStatus::final_executed) {
        done = false;
        break;
      }
    }
    if (!done) return;
    sp.checkpoint += k;
  }
}

void Replica::commit_to_change(Context& ctx, ReplicaIndex space, OwnerNumber owner) {
  auto& sp = spaces_[space];
  const OwnerNumber target = owner.next();
  if (sp.owner >= target || (sp.changing && *sp.changing >= target)) return;
  sp.changing = target;
  advance_checkpoint(sp);

  OwnerChangeMsg oc;
  oc.space = space;
  oc.new_owner = target;
  oc.sender = index_;
  oc.checkpoint = sp.checkpoint;
  for (std::uint64_t s = sp.checkpoint;; ++s) {
    auto it = sp.slots.find(s);
    if (it == sp.slots.end()) break;
    const auto& rec = it->second;
    oc.entries.push_back(HistoryEntry{rec.order, rec.request, rec.commit});
    if (rec.commit) oc.highest_commit = rec.commit;
  }
  oc.sig = keys_->scheme().sign(key_, signing_payload(oc));
  ctx.note("change", std::nullopt,
           "space=R" + std::to_string(space) + " owner=" + std::to_string(target.value) +
               " entries=" + std::to_string(oc.entries.size()));

  const ReplicaIndex to = target.owner(opts_.cluster.n);
  if (to == index_)
    on_owner_change(ctx, oc);
  else
    ctx.send(NodeId::replica(to), oc);
  arm(ctx, OwnerChangeWait{space, target}, opts_.owner_change_timeout);
}

std::uint32_t Replica::change_quorum() const {
  return opts_.owner_change_quorum ? opts_.owner_change_quorum : opts_.cluster.slow_quorum();
}

void Replica::on_owner_change(Context& ctx, const OwnerChangeMsg& m) {
  if (!verifier_.owner_change(m)) {
    ++counters_.invalid_messages;
    return;
  }
  if (m.new_owner.owner(opts_.cluster.n) != index_) return;
  auto& sp = spaces_[m.space];
  if (sp.owner >= m.new_owner) return;
  sp.collected[m.new_owner.value].emplace(m.sender, m);
  maybe_announce(ctx, m.space, m.new_owner);
}

void Replica::maybe_announce(Context& ctx, ReplicaIndex space, OwnerNumber target) {
  auto& sp = spaces_[space];
  if (sp.announced.count(target.value)) return;
  const auto& col = sp.collected[target.value];
  if (col.size() < change_quorum()) return;
  sp.announced.insert(target.value);

  NewOwnerMsg no;
  no.space = space;
  no.new_owner = target;
  no.sender = index_;
  for (const auto& [sender, msg] : col) no.proof.push_back(msg);
  HistorySelection g = select_history(verifier_, space, no.proof);
  no.base = g.base;
  no.safe = g.safe;
  no.sig = keys_->scheme().sign(key_, signing_payload(no));
  broadcast(ctx, no);
  apply_new_owner(ctx, space, target, g);
}

void Replica::on_new_owner(Context& ctx, const NewOwnerMsg& m) {
  if (m.space >= opts_.cluster.n || m.sender != m.new_owner.owner(opts_.cluster.n)) return;
  auto& sp = spaces_[m.space];
  if (sp.owner >= m.new_owner) return;
  if (!keys_->verify(NodeId::replica(m.sender), signing_payload(m), m.sig)) {
    ++counters_.invalid_messages;
    return;
  }
  std::set<ReplicaIndex> senders;
  for (const auto& p : m.proof) {
    if (p.space != m.space || p.new_owner != m.new_owner || !verifier_.owner_change(p) ||
        !senders.insert(p.sender).second) {
      ++counters_.invalid_messages;
      return;
    }
  }
  if (senders.size() < change_quorum()) {
    ++counters_.invalid_messages;
    return;
  }
  HistorySelection g = select_history(verifier_, m.space, m.proof);
  if (g.base != m.base || encode_history(g.safe) != encode_history(m.safe)) {
    ++counters_.invalid_messages;
    ctx.note("reject", std::nullopt, "NewOwner space=R" + std::to_string(m.space));
    return;
  }
  apply_new_owner(ctx, m.space, m.new_owner, g);
}

void Replica::apply_new_owner(Context& ctx, ReplicaIndex space, OwnerNumber owner,
                              const HistorySelection& g) {
  auto& sp = spaces_[space];
  sp.owner = owner;
  sp.frozen = true;
  sp.changing.reset();
  sp.buffered.clear();
  ++counters_.owner_changes;
  ctx.note("newowner", std::nullopt,
           "space=R" + std::to_string(space) + " owner=" + std::to_string(owner.value) +
               " base=" + std::to_string(g.base) + " safe=" + std::to_string(g.safe.size()));

  auto same_at = [&](std::uint64_t slot, const CommandRecord& rec) {
    if (slot < g.base || slot - g.base >= g.safe.size()) return false;
    return g.safe[slot - g.base].order.request_digest == rec.order.request_digest;
  };

  std::set<InstanceId> dropped;
  for (auto it = sp.slots.lower_bound(g.base); it != sp.slots.end();) {
    auto& rec = it->second;
    if (same_at(it->first, rec) || rec.status == CommandStatus::final_executed) {
      ++it;
      continue;
    }
    dropped.insert(rec.instance);
    ctx.note("void", rec.instance, command_detail(rec.request));
    unindex_record(rec);
    it = sp.slots.erase(it);
  }
  engine_.invalidate(dropped);

  for (std::size_t i = 0; i < g.safe.size(); ++i) {
    const auto& e = g.safe[i];
    InstanceId inst{space, g.base + i};
    CommandRecord* rec = record(inst);
    if (rec && rec->order.request_digest != e.order.request_digest) continue;  // final elsewhere
    if (!rec) {
      CommandRecord fresh;
      fresh.instance = inst;
      fresh.request = e.request;
      fresh.order = e.order;
      fresh.deps = e.deps;
      fresh.seq = e.seq;
      note_request(e.request);
      rec = &(sp.slots[inst.slot] = std::move(fresh));
      index_record(*rec);
    }
    rec->reply_on_final = true;
    if (!is_committed(rec->status)) {
      rec->deps = e.deps;
      rec->seq = e.seq;
      rec->status = CommandStatus::committed_slow;
      engine_.commit(inst, rec->request.id(), rec->request.command, rec->deps, rec->seq);
      ctx.note("commit", inst,
               command_detail(rec->request) + " deps=" + to_string(rec->deps) +
                   " seq=" + std::to_string(rec->seq.value) + " path=recovery");
    } else if (rec->status == CommandStatus::final_executed) {
      send_commit_reply(ctx, *rec);
    }
  }
  sp.next_slot = std::max<std::uint64_t>(g.base + g.safe.size(),
                                         sp.slots.empty() ? 0 : sp.slots.rbegin()->first + 1);
  engine_.seal(space, sp.next_slot);
  run_final(ctx);

  if (owner.owner(opts_.cluster.n) != index_) return;
  const auto& own = spaces_[index_];
  for (const auto& r : sp.retransmitted) {
    if (own.frozen || own.changing) break;
    if (by_command_.count(r.id()) || r.t <= clients_[r.client].t) continue;
    order(ctx, r);
  }
}

// --- replies and bookkeeping ------------------------------------------------------

void Replica::send_spec_reply(Context& ctx, CommandRecord& rec) {
  SpecReplyMsg r;
  r.owner = rec.order.owner;
  r.instance = rec.instance;
  r.deps = rec.deps;
  r.seq = rec.seq;
  r.request_digest = rec.order.request_digest;
  r.client = rec.request.client;
  r.t = rec.request.t;
  r.sender = index_;
  r.rep = rec.spec_rep;
  r.order = rec.order;
  r.sig = keys_->scheme().sign(key_, signing_payload(r));
  rec.spec_reply_sent = true;
  remember_reply(r.client, r.t, r);
  ctx.send(r.client, r);
}

void Replica::send_commit_reply(Context& ctx, CommandRecord& rec) {
  CommitReplyMsg r{rec.instance, rec.request.client, rec.request.t, rec.final_rep, index_};
  remember_reply(r.client, r.t, r);
  ctx.send(r.client, r);
}

void Replica::remember_reply(NodeId client, std::uint64_t t, const Message& m) {
  auto& cc = clients_[client];
  if (t < cc.t) return;
  cc.t = t;
  cc.reply = m;
}

void Replica::note_request(const RequestMsg& r) {
  auto& cc = clients_[r.client];
  if (r.t > cc.t) {
    cc.t = r.t;
    cc.reply.reset();
  }
}

DepSet Replica::interfering(const Command& cmd, const InstanceId& except) const {
  DepSet out;
  auto it = by_key_.find(cmd.key);
  if (it == by_key_.end()) return out;
  for (const auto& inst : it->second) {
    if (inst == except) continue;
    const auto& rec = spaces_[inst.space].slots.at(inst.slot);
    if (interferes(cmd, rec.request.command)) out.insert(inst);
  }
  return out;
}

void Replica::index_record(const CommandRecord& rec) {
  by_key_[rec.request.command.key].push_back(rec.instance);
  by_command_[rec.request.id()] = rec.instance;
}

void Replica::unindex_record(const CommandRecord& rec) {
  auto& v = by_key_[rec.request.command.key];
  v.erase(std::remove(v.begin(), v.end(), rec.instance), v.end());
  if (auto it = by_command_.find(rec.request.id());
      it != by_command_.end() && it->second == rec.instance)
    by_command_.erase(it);
}

CommandRecord* Replica::record(const InstanceId& inst) {
  if (inst.space >= spaces_.size()) return nullptr;
  auto& slots = spaces_[inst.space].slots;
  auto it = slots.find(inst.slot);
  return it == slots.end() ? nullptr : &it->second;
}

std::uint64_t Replica::arm(Context& ctx, TimerAction action, Time delay) {
  const std::uint64_t id = next_timer_++;
  timers_.emplace(id, std::move(action));
  ctx.set_timer(id, delay);
  return id;
}

void Replica::broadcast(Context& ctx, const Message& m) {
  for (ReplicaIndex r = 0; r < opts_.cluster.n; ++r)
    if (r != index_) ctx.send(NodeId::replica(r), m);
}

}  // namespace ezbft
