#include <algorithm>
#include <cmath>

#include "ezbft/harness.hpp"

namespace ezbft::harness {

namespace {

Time ms(double v) { return static_cast<Time>(std::llround(v * kMillisecond)); }

/// Closed-loop driver: submits the next command on delivery (after an
/// optional think time). Timer id 0 is reserved for it; the client's own
/// timer ids never take that value.
class WorkloadHost final : public Node {
 public:
  WorkloadHost(std::unique_ptr<Client> client, std::vector<Command> commands, Time start,
               Time think)
      : client_(std::move(client)), commands_(std::move(commands)), start_(start), think_(think) {
    client_->on_deliver = [this](Context& ctx, const Delivery&) {
      if (next_ >= commands_.size()) return;
      if (think_ > 0)
        ctx.set_timer(0, think_);
      else
        submit(ctx);
    };
  }

  void start(Context& ctx) override {
    if (!commands_.empty()) ctx.set_timer(0, start_);
  }
  void receive(Context& ctx, NodeId from, const Message& m) override { client_->receive(ctx, from, m); }
  void timer(Context& ctx, std::uint64_t id) override {
    if (id == 0)
      submit(ctx);
    else
      client_->timer(ctx, id);
  }

  Client& client() { return *client_; }

 private:
  void submit(Context& ctx) {
    if (next_ < commands_.size() && client_->submit(ctx, commands_[next_])) ++next_;
  }

  std::unique_ptr<Client> client_;
  std::vector<Command> commands_;
  std::size_t next_ = 0;
  Time start_, think_;
};

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

MetricsReport collect(const Scenario& s, const RunResult& r) {
  MetricsReport m;
  for (std::size_t i = 0; i < r.clients.size(); ++i) {
    const Client& c = *r.clients[i];
    for (const auto& d : c.deliveries())
      m.commands.push_back({d.id, i, s.region_name(s.clients[i].region), d.submitted, d.delivered,
                            d.path, d.steps, d.instance});
    m.delivered += c.deliveries().size();
    m.submitted += c.deliveries().size() + (c.phase() == Client::Phase::idle ? 0 : 1);
  }
  m.undelivered = m.submitted - m.delivered;

  std::map<std::string, std::vector<double>> by_region;
  std::vector<double> all;
  std::size_t fast = 0;
  Time first = INT64_MAX, last = 0;
  for (const auto& c : m.commands) {
    const double lat = static_cast<double>(c.delivered - c.submitted) / kMillisecond;
    by_region[c.region].push_back(lat);
    all.push_back(lat);
    if (c.path == CommitPath::fast) ++fast;
    first = std::min(first, c.submitted);
    last = std::max(last, c.delivered);
  }
  for (const auto& [region, lats] : by_region) {
    RegionSummary rs{region, lats.size(), 0, median(lats), percentile(lats, 0.99)};
    for (double l : lats) rs.mean_ms += l;
    rs.mean_ms /= static_cast<double>(lats.size());
    m.regions.push_back(rs);
  }
  if (!all.empty()) {
    for (double l : all) m.mean_latency_ms += l;
    m.mean_latency_ms /= static_cast<double>(all.size());
    m.fast_ratio = static_cast<double>(fast) / static_cast<double>(all.size());
    if (last > first)
      m.throughput = static_cast<double>(all.size()) / (static_cast<double>(last - first) / 1e6);
  }
  for (std::size_t i = 0; i < r.replicas.size(); ++i) {
    if (!r.correct(static_cast<ReplicaIndex>(i))) continue;
    m.owner_changes = std::max(m.owner_changes, r.replicas[i]->counters().owner_changes);
    m.rollbacks += r.replicas[i]->engine().rollback_count();
  }
  return m;
}

}  // namespace

Time default_slow_timeout(const Scenario& s, const ClientSpec& c) {
  double worst = 0;
  for (const auto& row : s.latency_ms)
    for (double d : row) worst = std::max(worst, d);
  const double home = s.latency_ms[c.region][c.home] + c.offset_ms;
  return ms(home + 2 * (worst + c.offset_ms + s.jitter_ms) + 1);
}

std::string RunResult::trace_digest_hex() const { return sim->trace_digest().hex(); }

RunResult run_scenario(const Scenario& scenario, const RunOptions& opts) {
  RunResult r;
  r.scenario = scenario;
  Scenario& s = r.scenario;
  if (opts.seed) s.seed = *opts.seed;
  if (opts.time_limit_ms) s.time_limit_ms = *opts.time_limit_ms;
  validate(s);
  r.faulty = s.faulty_replicas();
  r.out_of_model = s.out_of_model();

  std::shared_ptr<const crypto::SignatureScheme> scheme;
  if (s.signatures == "ed25519")
    scheme = std::make_shared<crypto::Ed25519Scheme>();
  else
    scheme = std::make_shared<crypto::KeyedDigestScheme>();
  auto registry = std::make_shared<crypto::KeyRegistry>(scheme);
  const auto seed = crypto::seed_from(s.seed);
  std::vector<KeyPair> replica_keys, client_keys;
  for (ReplicaIndex i = 0; i < s.n; ++i) {
    replica_keys.push_back(scheme->keygen(seed, NodeId::replica(i)));
    registry->add(replica_keys.back().pub);
  }
  for (std::size_t i = 0; i < s.clients.size(); ++i) {
    client_keys.push_back(scheme->keygen(seed, NodeId::client(static_cast<std::uint32_t>(i))));
    registry->add(client_keys.back().pub);
  }

  ClusterConfig cluster{s.n, s.f, s.slow_quorums};
  cluster.slow_quorums.resize(s.n);

  r.sim = std::make_unique<Simulator>(s.seed);
  Simulator& sim = *r.sim;
  std::set<NodeId> faulty_nodes;
  std::string faulty_list;
  for (auto f : r.faulty) {
    faulty_nodes.insert(NodeId::replica(f));
    faulty_list += (faulty_list.empty() ? "" : ",") + NodeId::replica(f).str();
  }
  r.monitor = InvariantMonitor(faulty_nodes);
  sim.set_observer([&monitor = r.monitor](const std::string& line) { monitor.feed(line); });
  sim.header("ezbft trace v1");
  sim.header("scenario=" + s.name + " seed=" + std::to_string(s.seed) + " n=" + std::to_string(s.n) +
             " f=" + std::to_string(s.f) + " signatures=" + std::string(scheme->name()) +
             " digest=" + std::string(crypto::kDigestName));
  sim.header("faulty=" + faulty_list);
  sim.header(std::string("out_of_model=") + (r.out_of_model ? "1" : "0"));
  for (const auto& f : s.faults)
    sim.header("fault target=" + f.target.str() + " behavior=" + std::string(behavior_name(f.behavior)));

  const auto& lat = s.latency_ms;
  const auto& clients = s.clients;
  sim.set_delay(
      [lat, clients](NodeId from, NodeId to) -> Time {
        auto site = [&](NodeId id) { return id.is_replica() ? id.index : clients[id.index].region; };
        double d = lat[site(from)][site(to)];
        if (from.is_client()) d += clients[from.index].offset_ms;
        if (to.is_client()) d += clients[to.index].offset_ms;
        return ms(d);
      },
      ms(s.jitter_ms));

  ReplicaOptions ropts;
  ropts.cluster = cluster;
  ropts.resend_timeout = ms(s.timers.resend_ms);
  ropts.buffer_timeout = ms(s.timers.buffer_ms);
  ropts.owner_change_timeout = ms(s.timers.owner_change_ms);
  ropts.owner_change_quorum = s.owner_change_quorum;
  ropts.checkpoint_interval = s.checkpoint_interval;
  ropts.rollback = s.rollback;

  r.replicas.resize(s.n);
  r.wrappers.resize(s.n, nullptr);
  for (ReplicaIndex i = 0; i < s.n; ++i) {
    auto replica = std::make_unique<Replica>(i, ropts, replica_keys[i], registry);
    r.replicas[i] = replica.get();
    std::unique_ptr<Node> node = std::move(replica);
    for (const auto& f : s.faults) {
      if (!f.target.is_replica() || f.target.index != i) continue;
      const Time until = f.until_ms < 0 ? INT64_MAX : ms(f.until_ms);
      std::unique_ptr<ByzantineReplica> wrapped;
      auto inner = [&] {
        return std::unique_ptr<Replica>(static_cast<Replica*>(node.release()));
      };
      switch (f.behavior) {
        case Behavior::mute:
          wrapped = std::make_unique<MuteReplica>(inner(), ms(f.from_ms), until);
          break;
        case Behavior::lie_deps:
          wrapped = std::make_unique<LieDepsReplica>(inner());
          break;
        case Behavior::equivocate: {
          std::set<ReplicaIndex> group(f.group.begin(), f.group.end());
          if (group.empty()) {
            // First other replica sees only the original order.
            bool skipped = false;
            for (ReplicaIndex j = 0; j < s.n; ++j) {
              if (j == i) continue;
              if (!skipped) {
                skipped = true;
                continue;
              }
              group.insert(j);
            }
          }
          wrapped = std::make_unique<EquivocatingReplica>(inner(), group, f.limit);
          break;
        }
        default:
          break;
      }
      if (wrapped) {
        r.wrappers[i] = wrapped.get();
        node = std::move(wrapped);
      }
    }
    sim.add_node(NodeId::replica(i), std::move(node));
  }

  for (const auto& f : s.faults) {
    const Time until = f.until_ms < 0 ? INT64_MAX : ms(f.until_ms);
    switch (f.behavior) {
      case Behavior::crash:
        sim.crash(f.target, ms(f.at_ms));
        break;
      case Behavior::delay:
        sim.add_fault({LinkFault::Kind::delay, f.target, 0, ms(f.extra_ms), ms(f.from_ms), until, f.inbound});
        break;
      case Behavior::drop:
        sim.add_fault({LinkFault::Kind::drop, f.target, f.probability, 0, ms(f.from_ms), until, f.inbound});
        break;
      case Behavior::partition:
        sim.add_fault({LinkFault::Kind::drop, f.target, 1.0, 0, ms(f.from_ms), until, true});
        break;
      default:
        break;
    }
  }

  for (std::size_t i = 0; i < s.clients.size(); ++i) {
    const auto& spec = s.clients[i];
    ClientOptions copts;
    copts.cluster = cluster;
    copts.home = spec.home;
    copts.slow_timeout = s.timers.slow_ms ? ms(*s.timers.slow_ms) : default_slow_timeout(s, spec);
    copts.retransmit_timeout = s.timers.retransmit_ms ? ms(*s.timers.retransmit_ms) : 6 * copts.slow_timeout;
    const NodeId id = NodeId::client(static_cast<std::uint32_t>(i));
    auto client = std::make_unique<Client>(id, copts, client_keys[i], registry);
    r.clients.push_back(client.get());
    sim.add_node(id, std::make_unique<WorkloadHost>(std::move(client), workload(s, i),
                                                    ms(spec.start_ms), ms(spec.think_ms)));
  }

  sim.run(ms(s.time_limit_ms));
  sim.set_observer(nullptr);
  r.monitor.finish();
  r.metrics = collect(s, r);
  return r;
}

}  // namespace ezbft::harness
