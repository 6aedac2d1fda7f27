#include <map>
#include <sstream>

#include "ezbft/harness.hpp"

namespace ezbft::harness {

namespace {

struct Parsed {
  std::string kind;
  std::string src;
  std::string instance;
  std::map<std::string, std::string> detail;
};

// Note records: "time kind self - - instance key=value ...".
std::optional<Parsed> parse_note(const std::string& line) {
  std::istringstream in(line);
  std::string time, kind, src, dst, msg, inst;
  if (!(in >> time >> kind >> src >> dst >> msg >> inst)) return std::nullopt;
  if (dst != "-" || msg != "-") return std::nullopt;
  Parsed p{kind, src, inst, {}};
  std::string field;
  while (in >> field) {
    const auto eq = field.find('=');
    if (eq != std::string::npos) p.detail[field.substr(0, eq)] = field.substr(eq + 1);
  }
  return p;
}

std::string get(const Parsed& p, const std::string& key) {
  auto it = p.detail.find(key);
  return it == p.detail.end() ? std::string() : it->second;
}

}  // namespace

void InvariantMonitor::report(std::string property, std::string message, const std::string& line) {
  violations_.push_back({std::move(property), std::move(message), line});
}

const Violation* InvariantMonitor::first(std::string_view property) const {
  for (const auto& v : violations_)
    if (v.property == property) return &v;
  return nullptr;
}

void InvariantMonitor::feed(const std::string& line) {
  if (line.empty() || line[0] == '#') return;
  auto p = parse_note(line);
  if (!p) return;

  if (p->kind == "submit") {
    const auto t = get(*p, "t");
    submitted_.insert({p->src, t, get(*p, "cmd")});
    pending_.emplace(std::make_pair(p->src, t), line);
    return;
  }
  if (p->kind == "deliver") {
    pending_.erase({p->src, get(*p, "t")});
    return;
  }

  NodeId self;
  if (!parse_node_id(p->src, self) || !self.is_replica() || faulty_.count(self)) return;

  if (p->kind == "final") {
    Fact fact{get(*p, "c"), get(*p, "t"), get(*p, "cmd")};
    if (!submitted_.count({fact.client, fact.t, fact.cmd}) &&
        reported_.insert("N " + p->instance).second)
      report("nontriviality", p->src + " executed a command no client submitted at " + p->instance,
             line);
    auto [it, fresh] = final_at_.try_emplace(p->instance, fact, line);
    if (!fresh && !(it->second.first == fact) && reported_.insert("C " + p->instance).second)
      report("consistency",
             p->src + " executed " + fact.client + "/" + fact.t + " at " + p->instance +
                 " but an earlier final there was: " + it->second.second,
             line);
  } else if (p->kind == "commit") {
    const std::string record = get(*p, "c") + " " + get(*p, "t") + " " + get(*p, "cmd") + " " +
                               get(*p, "deps") + " " + get(*p, "seq");
    auto [it, fresh] = committed_.try_emplace({p->src, p->instance}, record);
    if (!fresh && it->second != record && reported_.insert("S " + p->src + p->instance).second)
      report("stability", p->src + " recommitted " + p->instance + " with different content", line);
  } else if (p->kind == "void") {
    if (committed_.count({p->src, p->instance}) &&
        reported_.insert("S " + p->src + p->instance).second)
      report("stability", p->src + " voided committed instance " + p->instance, line);
  }
}

void InvariantMonitor::finish() {
  for (const auto& [key, line] : pending_)
    report("liveness", key.first + " request t=" + key.second + " was never delivered", line);
  pending_.clear();
}

InvariantMonitor check_trace(const std::string& trace) {
  std::set<NodeId> faulty;
  std::istringstream in(trace);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (line.rfind("# faulty=", 0) == 0) {
      std::istringstream list(line.substr(9));
      std::string item;
      while (std::getline(list, item, ',')) {
        NodeId id;
        if (parse_node_id(item, id)) faulty.insert(id);
      }
    }
    lines.push_back(line);
  }
  InvariantMonitor m(faulty);
  for (const auto& l : lines) m.feed(l);
  m.finish();
  return m;
}

}  // namespace ezbft::harness
