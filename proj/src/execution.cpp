#include "ezbft/execution.hpp"

#include <algorithm>
#include <queue>
#include <tuple>

namespace ezbft {

namespace {

struct Indexed {
  std::vector<InstanceId> ids;
  std::vector<SeqNo> seqs;
  std::vector<std::vector<std::size_t>> edges;
};

Indexed index_graph(const DepGraph& g) {
  Indexed out;
  std::map<InstanceId, std::size_t> pos;
  for (const auto& [id, node] : g) {
    pos.emplace(id, out.ids.size());
    out.ids.push_back(id);
    out.seqs.push_back(node.seq);
  }
  out.edges.resize(out.ids.size());
  for (const auto& [id, node] : g) {
    auto& e = out.edges[pos[id]];
    for (const auto& d : node.deps)
      if (auto it = pos.find(d); it != pos.end()) e.push_back(it->second);
  }
  return out;
}

// Component id per vertex; components are numbered in completion order, so
// every component's successors carry smaller numbers.
std::vector<std::size_t> tarjan(const Indexed& g, std::size_t& count) {
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  const std::size_t n = g.ids.size();
  std::vector<std::size_t> index(n, kUnset), low(n, 0), comp(n, kUnset);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::pair<std::size_t, std::size_t>> frames;  // (vertex, next edge)
  std::size_t next_index = 0;
  count = 0;

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    frames.emplace_back(root, 0);
    while (!frames.empty()) {
      auto& [v, ei] = frames.back();
      if (ei == 0 && index[v] == kUnset) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      if (ei < g.edges[v].size()) {
        std::size_t w = g.edges[v][ei++];
        if (index[w] == kUnset) {
          frames.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = count;
        } while (w != v);
        ++count;
      }
      std::size_t done = v;
      frames.pop_back();
      if (!frames.empty()) {
        auto parent = frames.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
    }
  }
  return comp;
}

using OrderKey = std::tuple<std::uint64_t, ReplicaIndex, std::uint64_t>;

OrderKey key_of(const InstanceId& id, SeqNo seq) { return {seq.value, id.space, id.slot}; }

}  // namespace

std::vector<std::vector<InstanceId>> strongly_connected(const DepGraph& g) {
  auto ig = index_graph(g);
  std::size_t count = 0;
  auto comp = tarjan(ig, count);
  std::vector<std::vector<InstanceId>> out(count);
  for (std::size_t v = 0; v < ig.ids.size(); ++v) out[comp[v]].push_back(ig.ids[v]);
  return out;
}

std::vector<InstanceId> linearize(const DepGraph& g) {
  auto ig = index_graph(g);
  std::size_t count = 0;
  auto comp = tarjan(ig, count);

  std::vector<std::vector<std::size_t>> members(count);
  for (std::size_t v = 0; v < ig.ids.size(); ++v) members[comp[v]].push_back(v);
  std::vector<OrderKey> ckey(count);
  for (std::size_t c = 0; c < count; ++c) {
    auto& m = members[c];
    std::sort(m.begin(), m.end(), [&](std::size_t a, std::size_t b) {
      return key_of(ig.ids[a], ig.seqs[a]) < key_of(ig.ids[b], ig.seqs[b]);
    });
    ckey[c] = key_of(ig.ids[m.front()], ig.seqs[m.front()]);
  }

  // Kahn over the condensation: a component is released once every
  // component it depends on has been emitted.
  std::vector<std::size_t> waiting(count, 0);
  std::vector<std::vector<std::size_t>> dependents(count);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t v = 0; v < ig.ids.size(); ++v)
    for (auto w : ig.edges[v]) {
      auto a = comp[v], b = comp[w];
      if (a != b && seen.emplace(a, b).second) {
        ++waiting[a];
        dependents[b].push_back(a);
      }
    }

  using Item = std::pair<OrderKey, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> ready;
  for (std::size_t c = 0; c < count; ++c)
    if (waiting[c] == 0) ready.emplace(ckey[c], c);

  std::vector<InstanceId> order;
  order.reserve(ig.ids.size());
  while (!ready.empty()) {
    auto c = ready.top().second;
    ready.pop();
    for (auto v : members[c]) order.push_back(ig.ids[v]);
    for (auto d : dependents[c])
      if (--waiting[d] == 0) ready.emplace(ckey[d], d);
  }
  return order;
}

// --- engine -----------------------------------------------------------------

template <typename Between, typename Keep>
void ExecutionEngine::rewind(std::size_t from, Between between, Keep keep) {
  std::vector<SpecEntry> tail(spec_log_.begin() + static_cast<std::ptrdiff_t>(from),
                              spec_log_.end());
  state_.rollback_to(from);
  spec_log_.resize(from);
  bool changed = between();
  for (auto& e : tail) {
    if (!keep(e)) continue;
    Reply again = state_.apply(e.command, ExecMode::speculative);
    changed = changed || again != e.reply;
    e.reply = again;
    spec_log_.push_back(std::move(e));
  }
  if (changed) ++rollbacks_;
}

Reply ExecutionEngine::speculate(const InstanceId& inst, const CommandId& id, const Command& cmd,
                                 const DepSet& deps, SeqNo seq) {
  voided_.erase(inst);
  auto [it, fresh] = nodes_.try_emplace(inst, Node{id, cmd, deps, seq, Stage::pending});
  if (!fresh && it->second.stage == Stage::final) return final_replies_.at(it->second.id);

  if (auto f = final_replies_.find(id); f != final_replies_.end()) return f->second;
  for (const auto& e : spec_log_)
    if (e.id == id) return e.reply;

  Reply rep = state_.apply(cmd, ExecMode::speculative);
  spec_log_.push_back({inst, id, cmd, rep});
  return rep;
}

void ExecutionEngine::commit(const InstanceId& inst, const CommandId& id, const Command& cmd,
                             DepSet deps, SeqNo seq) {
  voided_.erase(inst);
  auto& node = nodes_[inst];
  if (node.stage != Stage::pending) return;
  node.id = id;
  node.command = cmd;
  node.deps = std::move(deps);
  node.deps.erase(inst);
  node.seq = seq;
  node.stage = Stage::committed;
  open_.insert(inst);
}

void ExecutionEngine::invalidate(const std::set<InstanceId>& instances) {
  std::size_t from = spec_log_.size();
  for (std::size_t i = 0; i < spec_log_.size(); ++i)
    if (instances.count(spec_log_[i].instance)) {
      from = i;
      break;
    }
  for (const auto& inst : instances) {
    auto it = nodes_.find(inst);
    if (it != nodes_.end() && it->second.stage == Stage::final) continue;
    if (it != nodes_.end()) nodes_.erase(it);
    open_.erase(inst);
    voided_.insert(inst);
  }
  const bool dropped = from < spec_log_.size();
  rewind(from, [&] { return dropped; }, [&](const SpecEntry& e) { return !instances.count(e.instance); });
}

bool ExecutionEngine::is_void(const InstanceId& inst) const {
  if (voided_.count(inst)) return true;
  auto it = sealed_.find(inst.space);
  return it != sealed_.end() && inst.slot >= it->second && !nodes_.count(inst);
}

bool ExecutionEngine::is_committed(const InstanceId& inst) const {
  auto it = nodes_.find(inst);
  return it != nodes_.end() && it->second.stage != Stage::pending;
}

bool ExecutionEngine::is_final(const InstanceId& inst) const {
  auto it = nodes_.find(inst);
  return it != nodes_.end() && it->second.stage == Stage::final;
}

std::optional<Reply> ExecutionEngine::final_reply(const CommandId& id) const {
  if (auto it = final_replies_.find(id); it != final_replies_.end()) return it->second;
  return std::nullopt;
}

bool ExecutionEngine::ready_for_final(const InstanceId& inst) const {
  auto it = nodes_.find(inst);
  if (it == nodes_.end() || it->second.stage != Stage::committed) return false;
  std::set<InstanceId> seen{inst};
  std::vector<InstanceId> todo{inst};
  while (!todo.empty()) {
    auto cur = todo.back();
    todo.pop_back();
    for (const auto& d : nodes_.at(cur).deps) {
      if (is_void(d) || !seen.insert(d).second) continue;
      auto dn = nodes_.find(d);
      if (dn == nodes_.end() || dn->second.stage == Stage::pending) return false;
      if (dn->second.stage == Stage::committed) todo.push_back(d);
    }
  }
  return true;
}

std::vector<FinalExecution> ExecutionEngine::execute_ready() {
  if (open_.empty()) return {};

  // An open instance is blocked when it reaches an unknown or uncommitted
  // dependency; blocking propagates backwards along dependency edges.
  std::map<InstanceId, std::vector<InstanceId>> dependents;
  std::set<InstanceId> blocked;
  std::vector<InstanceId> frontier;
  for (const auto& inst : open_) {
    for (const auto& d : nodes_.at(inst).deps) {
      if (is_void(d)) continue;
      auto dn = nodes_.find(d);
      if (dn == nodes_.end() || dn->second.stage == Stage::pending) {
        if (blocked.insert(inst).second) frontier.push_back(inst);
      } else if (dn->second.stage == Stage::committed) {
        dependents[d].push_back(inst);
      }
    }
  }
  while (!frontier.empty()) {
    auto cur = frontier.back();
    frontier.pop_back();
    for (const auto& up : dependents[cur])
      if (blocked.insert(up).second) frontier.push_back(up);
  }

  DepGraph ready;
  for (const auto& inst : open_)
    if (!blocked.count(inst)) {
      const auto& n = nodes_.at(inst);
      ready.emplace(inst, GraphNode{n.deps, n.seq});
    }
  if (ready.empty()) return {};

  auto order = linearize(ready);
  std::set<std::string> keys;
  std::set<CommandId> ids;
  for (const auto& inst : order) {
    keys.insert(nodes_.at(inst).command.key);
    ids.insert(nodes_.at(inst).id);
  }

  std::size_t from = 0;
  if (mode_ == RollbackMode::partial) {
    from = spec_log_.size();
    for (std::size_t i = 0; i < spec_log_.size(); ++i)
      // A faulty client may reuse an id for a different command on another key.
      if (keys.count(spec_log_[i].command.key) || ready.count(spec_log_[i].instance) ||
          ids.count(spec_log_[i].id)) {
        from = i;
        break;
      }
  }

  std::map<CommandId, Reply> speculated;
  for (std::size_t i = from; i < spec_log_.size(); ++i)
    speculated.emplace(spec_log_[i].id, spec_log_[i].reply);

  std::vector<FinalExecution> out;
  rewind(
      from,
      [&] {
        bool diverged = false;
        for (const auto& inst : order) {
          auto& n = nodes_.at(inst);
          n.stage = Stage::final;
          open_.erase(inst);
          final_order_.push_back(inst);
          FinalExecution fe{inst, n.id, n.command, std::nullopt, false};
          if (auto it = final_replies_.find(n.id); it != final_replies_.end()) {
            fe.reply = it->second;
            fe.duplicate = true;
          } else {
            fe.reply = state_.apply(n.command, ExecMode::final);
            final_replies_.emplace(n.id, fe.reply);
            auto s = speculated.find(n.id);
            diverged = diverged || (s != speculated.end() && s->second != fe.reply);
          }
          out.push_back(std::move(fe));
        }
        return diverged;
      },
      [&](const SpecEntry& e) { return !ready.count(e.instance) && !final_replies_.count(e.id); });
  return out;
}

}  // namespace ezbft
