#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "ezbft/harness.hpp"

namespace ezbft::harness {

namespace pt = boost::property_tree;

namespace {

[[noreturn]] void parse_error(const std::string& where, const std::string& what) {
  throw ScenarioError(ScenarioError::Kind::parse, where + ": " + what);
}

[[noreturn]] void invalid(const std::string& what) {
  throw ScenarioError(ScenarioError::Kind::invalid, what);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    auto part = trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (!part.empty()) out.push_back(std::move(part));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t as_uint(const std::string& where, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) parse_error(where, "expected integer, got '" + v + "'");
  return out;
}

double as_double(const std::string& where, const std::string& v) {
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0;
  if (!(in >> out) || !in.eof() || !std::isfinite(out))
    parse_error(where, "expected number, got '" + v + "'");
  return out;
}

bool as_bool(const std::string& where, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  parse_error(where, "expected boolean, got '" + v + "'");
}

std::vector<ReplicaIndex> as_indices(const std::string& where, const std::string& v) {
  std::vector<ReplicaIndex> out;
  for (const auto& part : split(v, ',')) {
    std::string p = part;
    if (!p.empty() && (p[0] == 'R' || p[0] == 'r')) p.erase(0, 1);
    out.push_back(static_cast<ReplicaIndex>(as_uint(where, p)));
  }
  return out;
}

NodeId as_node(const std::string& where, const std::string& v) {
  if (v.size() >= 2 && (v[0] == 'R' || v[0] == 'C'))
    return v[0] == 'R' ? NodeId::replica(static_cast<ReplicaIndex>(as_uint(where, v.substr(1))))
                       : NodeId::client(static_cast<std::uint32_t>(as_uint(where, v.substr(1))));
  return NodeId::replica(static_cast<ReplicaIndex>(as_uint(where, v)));
}

/// Index of "rK" style keys.
std::optional<std::size_t> row_key(const std::string& key) {
  if (key.size() < 2 || key[0] != 'r') return std::nullopt;
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(key.data() + 1, key.data() + key.size(), out);
  if (ec != std::errc() || ptr != key.data() + key.size()) return std::nullopt;
  return out;
}

template <typename F>
void each(const pt::ptree& section, const std::string& name, F&& f) {
  for (const auto& [key, child] : section) {
    if (!child.empty()) parse_error(name, "nested key '" + key + "'");
    f(key, trim(child.data()), name + "." + key);
  }
}

void parse_scenario_section(const pt::ptree& sec, Scenario& s) {
  each(sec, "scenario", [&](const std::string& k, const std::string& v, const std::string& w) {
    if (k == "name") s.name = v;
    else if (k == "n") s.n = static_cast<std::uint32_t>(as_uint(w, v));
    else if (k == "f") s.f = static_cast<std::uint32_t>(as_uint(w, v));
    else if (k == "seed") s.seed = as_uint(w, v);
    else if (k == "time_limit_ms") s.time_limit_ms = as_double(w, v);
    else if (k == "checkpoint_interval") s.checkpoint_interval = as_uint(w, v);
    else if (k == "owner_change_quorum") s.owner_change_quorum = static_cast<std::uint32_t>(as_uint(w, v));
    else if (k == "allow_out_of_model") s.allow_out_of_model = as_bool(w, v);
    else if (k == "signatures") {
      if (v != "keyed" && v != "ed25519") parse_error(w, "expected keyed or ed25519");
      s.signatures = v;
    } else if (k == "rollback") {
      if (v == "partial") s.rollback = RollbackMode::partial;
      else if (v == "full") s.rollback = RollbackMode::full;
      else parse_error(w, "expected partial or full");
    } else if (k == "regions") s.regions = split(v, ',');
    else parse_error(w, "unknown key");
  });
}

void parse_latency(const pt::ptree& sec, Scenario& s) {
  std::map<std::size_t, std::vector<double>> rows;
  each(sec, "latency", [&](const std::string& k, const std::string& v, const std::string& w) {
    if (k == "jitter_ms") {
      s.jitter_ms = as_double(w, v);
      return;
    }
    auto row = row_key(k);
    if (!row) parse_error(w, "unknown key");
    std::vector<double> values;
    for (const auto& part : split(v, ',')) values.push_back(as_double(w, part));
    rows[*row] = std::move(values);
  });
  for (const auto& [i, row] : rows) {
    if (i != s.latency_ms.size()) parse_error("latency", "rows must be r0, r1, ... without gaps");
    s.latency_ms.push_back(row);
  }
}

void parse_timers(const pt::ptree& sec, Scenario& s) {
  each(sec, "timers", [&](const std::string& k, const std::string& v, const std::string& w) {
    const double x = as_double(w, v);
    if (k == "slow_ms") s.timers.slow_ms = x;
    else if (k == "retransmit_ms") s.timers.retransmit_ms = x;
    else if (k == "resend_ms") s.timers.resend_ms = x;
    else if (k == "buffer_ms") s.timers.buffer_ms = x;
    else if (k == "owner_change_ms") s.timers.owner_change_ms = x;
    else parse_error(w, "unknown key");
  });
}

void parse_slow_quorum(const pt::ptree& sec, Scenario& s) {
  each(sec, "slow_quorum", [&](const std::string& k, const std::string& v, const std::string& w) {
    auto row = row_key(k);
    if (!row) parse_error(w, "unknown key");
    if (s.slow_quorums.size() <= *row) s.slow_quorums.resize(*row + 1);
    s.slow_quorums[*row] = as_indices(w, v);
  });
}

ClientSpec parse_client(const pt::ptree& sec, const std::string& name) {
  ClientSpec c;
  bool region_set = false;
  each(sec, name, [&](const std::string& k, const std::string& v, const std::string& w) {
    if (k == "home") c.home = static_cast<ReplicaIndex>(as_indices(w, v).at(0));
    else if (k == "region") {
      c.region = static_cast<ReplicaIndex>(as_indices(w, v).at(0));
      region_set = true;
    } else if (k == "offset_ms") c.offset_ms = as_double(w, v);
    else if (k == "requests") c.requests = as_uint(w, v);
    else if (k == "key_space") c.key_space = as_uint(w, v);
    else if (k == "conflict_rate") c.conflict_rate = as_double(w, v);
    else if (k == "start_ms") c.start_ms = as_double(w, v);
    else if (k == "think_ms") c.think_ms = as_double(w, v);
    else if (k == "commands") {
      for (const auto& text : split(v, ';')) {
        Command cmd;
        if (!parse_command(text, cmd)) parse_error(w, "bad command '" + text + "'");
        c.commands.push_back(std::move(cmd));
      }
    } else parse_error(w, "unknown key");
  });
  if (!region_set) c.region = c.home;
  if (!c.commands.empty()) c.requests = c.commands.size();
  return c;
}

FaultSpec parse_fault(const pt::ptree& sec, const std::string& name) {
  FaultSpec f;
  bool has_target = false, has_behavior = false;
  each(sec, name, [&](const std::string& k, const std::string& v, const std::string& w) {
    if (k == "target") {
      f.target = as_node(w, v);
      has_target = true;
    } else if (k == "behavior") {
      has_behavior = true;
      if (v == "crash") f.behavior = Behavior::crash;
      else if (v == "mute") f.behavior = Behavior::mute;
      else if (v == "equivocate") f.behavior = Behavior::equivocate;
      else if (v == "lie_deps") f.behavior = Behavior::lie_deps;
      else if (v == "delay") f.behavior = Behavior::delay;
      else if (v == "drop") f.behavior = Behavior::drop;
      else if (v == "partition") f.behavior = Behavior::partition;
      else parse_error(w, "unknown behavior '" + v + "'");
    } else if (k == "at_ms") f.at_ms = as_double(w, v);
    else if (k == "from_ms") f.from_ms = as_double(w, v);
    else if (k == "until_ms") f.until_ms = as_double(w, v);
    else if (k == "extra_ms") f.extra_ms = as_double(w, v);
    else if (k == "probability") f.probability = as_double(w, v);
    else if (k == "inbound") f.inbound = as_bool(w, v);
    else if (k == "group") f.group = as_indices(w, v);
    else if (k == "limit") f.limit = as_uint(w, v);
    else parse_error(w, "unknown key");
  });
  if (!has_target) parse_error(name, "missing target");
  if (!has_behavior) parse_error(name, "missing behavior");
  return f;
}

bool numbered(const std::string& section, const std::string& prefix) {
  if (section.rfind(prefix, 0) != 0 || section.size() == prefix.size()) return false;
  return std::all_of(section.begin() + static_cast<std::ptrdiff_t>(prefix.size()), section.end(),
                     [](char ch) { return ch >= '0' && ch <= '9'; });
}

}  // namespace

std::string_view behavior_name(Behavior b) {
  switch (b) {
    case Behavior::crash: return "crash";
    case Behavior::mute: return "mute";
    case Behavior::equivocate: return "equivocate";
    case Behavior::lie_deps: return "lie_deps";
    case Behavior::delay: return "delay";
    case Behavior::drop: return "drop";
    case Behavior::partition: return "partition";
  }
  return "?";
}

bool FaultSpec::byzantine() const {
  switch (behavior) {
    case Behavior::crash:
    case Behavior::mute:
    case Behavior::equivocate:
    case Behavior::lie_deps:
      return true;
    default:
      return false;
  }
}

std::set<ReplicaIndex> Scenario::faulty_replicas() const {
  std::set<ReplicaIndex> out;
  for (const auto& f : faults)
    if (f.byzantine() && f.target.is_replica()) out.insert(f.target.index);
  return out;
}

std::string Scenario::region_name(ReplicaIndex r) const {
  return r < regions.size() ? regions[r] : "R" + std::to_string(r);
}

Scenario parse_scenario(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    parse_error("line " + std::to_string(e.line()), e.message());
  }

  Scenario s;
  std::map<std::size_t, ClientSpec> clients;
  std::map<std::size_t, FaultSpec> faults;
  for (const auto& [name, sec] : tree) {
    if (sec.empty() && !sec.data().empty()) parse_error(name, "key outside any section");
    if (name == "scenario") parse_scenario_section(sec, s);
    else if (name == "latency") parse_latency(sec, s);
    else if (name == "timers") parse_timers(sec, s);
    else if (name == "slow_quorum") parse_slow_quorum(sec, s);
    else if (name == "compare") {
      each(sec, name, [&](const std::string& k, const std::string& v, const std::string& w) {
        if (k == "primary") s.compare_primary = as_indices(w, v).at(0);
        else parse_error(w, "unknown key");
      });
    } else if (numbered(name, "client.")) {
      clients[as_uint(name, name.substr(7))] = parse_client(sec, name);
    } else if (numbered(name, "fault.")) {
      faults[as_uint(name, name.substr(6))] = parse_fault(sec, name);
    } else {
      parse_error(name, "unknown section");
    }
  }
  for (auto& [i, c] : clients) s.clients.push_back(std::move(c));
  for (auto& [i, f] : faults) s.faults.push_back(std::move(f));
  validate(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) parse_error(path, "cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  Scenario s = parse_scenario(buf.str());
  if (s.name.empty()) {
    auto base = path.substr(path.find_last_of('/') + 1);
    s.name = base.substr(0, base.find('.'));
  }
  return s;
}

void validate(const Scenario& s) {
  if (s.f < 1 || s.n != 3 * s.f + 1)
    invalid("n must equal 3f+1 with f >= 1 (n=" + std::to_string(s.n) + ", f=" + std::to_string(s.f) + ")");
  if (s.latency_ms.size() != s.n) invalid("latency matrix needs exactly n rows");
  for (std::size_t i = 0; i < s.n; ++i) {
    if (s.latency_ms[i].size() != s.n) invalid("latency row r" + std::to_string(i) + " needs n entries");
    for (double d : s.latency_ms[i])
      if (d < 0) invalid("negative delay in row r" + std::to_string(i));
  }
  if (s.jitter_ms < 0) invalid("jitter_ms must be >= 0");
  if (s.time_limit_ms <= 0) invalid("time_limit_ms must be positive");
  if (s.checkpoint_interval == 0) invalid("checkpoint_interval must be positive");
  if (s.owner_change_quorum != 0 &&
      (s.owner_change_quorum < s.f + 1 || s.owner_change_quorum > s.n))
    invalid("owner_change_quorum must lie in [f+1, n]");
  if (!s.regions.empty() && s.regions.size() != s.n) invalid("regions needs n names");
  if (s.slow_quorums.size() > s.n) invalid("slow_quorum row beyond n");
  for (std::size_t leader = 0; leader < s.slow_quorums.size(); ++leader) {
    const auto& q = s.slow_quorums[leader];
    if (q.empty()) continue;
    std::set<ReplicaIndex> members(q.begin(), q.end());
    if (members.size() != q.size() || q.size() != 2 * s.f + 1)
      invalid("slow quorum r" + std::to_string(leader) + " needs 2f+1 distinct replicas");
    if (*members.rbegin() >= s.n) invalid("slow quorum member out of range");
    if (!members.count(static_cast<ReplicaIndex>(leader)))
      invalid("slow quorum r" + std::to_string(leader) + " must contain its leader");
  }
  if (s.clients.empty()) invalid("at least one client is required");
  for (std::size_t i = 0; i < s.clients.size(); ++i) {
    const auto& c = s.clients[i];
    const std::string name = "client." + std::to_string(i);
    if (c.home >= s.n || c.region >= s.n) invalid(name + ": home/region out of range");
    if (c.conflict_rate < 0 || c.conflict_rate > 1) invalid(name + ": conflict_rate must lie in [0, 1]");
    if (c.key_space == 0) invalid(name + ": key_space must be positive");
    if (c.offset_ms < 0 || c.start_ms < 0 || c.think_ms < 0) invalid(name + ": negative time");
  }
  for (const auto& f : s.faults) {
    if (f.target.is_replica() ? f.target.index >= s.n : f.target.index >= s.clients.size())
      invalid("fault target " + f.target.str() + " out of range");
    if (!f.target.is_replica() && f.byzantine())
      invalid("fault target " + f.target.str() + ": only link faults apply to clients");
    if (f.probability < 0 || f.probability > 1) invalid("fault probability must lie in [0, 1]");
    for (auto r : f.group)
      if (r >= s.n || r == f.target.index) invalid("equivocation group member out of range");
  }
  // A replica may carry one attack strategy; link faults stack freely.
  std::set<ReplicaIndex> attacked;
  for (const auto& f : s.faults)
    if (f.byzantine() && f.behavior != Behavior::crash && !attacked.insert(f.target.index).second)
      invalid("replica R" + std::to_string(f.target.index) + " has more than one byzantine behavior");
  if (s.out_of_model() && !s.allow_out_of_model)
    invalid("more than f faulty replicas; set allow_out_of_model = true to run anyway");
}

std::vector<Command> workload(const Scenario& s, std::size_t index) {
  const auto& c = s.clients.at(index);
  if (!c.commands.empty()) return c.commands;
  // Own stream per client so adding a client does not reshuffle the others.
  std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32),
                    static_cast<std::uint32_t>(index), 0x77u};
  std::mt19937_64 rng(seq);
  std::vector<Command> out;
  for (std::size_t i = 0; i < c.requests; ++i) {
    const std::uint64_t u = rng() % 1'000'000;
    const std::uint64_t k = rng() % c.key_space;
    const auto value = static_cast<std::int64_t>(i + 1);
    if (static_cast<double>(u) < c.conflict_rate * 1'000'000)
      out.push_back(Command::put("hot", value));
    else
      out.push_back(Command::put("c" + std::to_string(index) + "k" + std::to_string(k), value));
  }
  return out;
}

}  // namespace ezbft::harness
