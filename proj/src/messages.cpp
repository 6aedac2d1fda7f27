#include "ezbft/messages.hpp"

#include <type_traits>

namespace ezbft {

std::string InstanceId::str() const {
  return "R" + std::to_string(space) + "." + std::to_string(slot);
}

std::string to_string(const DepSet& deps) {
  std::string out = "{";
  bool first = true;
  for (const auto& d : deps) {
    if (!first) out += ",";
    out += d.str();
    first = false;
  }
  return out + "}";
}

std::string_view to_string(CommandStatus s) {
  switch (s) {
    case CommandStatus::pre_accepted: return "pre-accepted";
    case CommandStatus::spec_executed: return "spec-executed";
    case CommandStatus::committed_fast: return "committed-fast";
    case CommandStatus::committed_slow: return "committed-slow";
    case CommandStatus::final_executed: return "final-executed";
  }
  return "?";
}

bool is_committed(CommandStatus s) {
  return s == CommandStatus::committed_fast || s == CommandStatus::committed_slow ||
         s == CommandStatus::final_executed;
}

std::vector<ReplicaIndex> ClusterConfig::designated_quorum(ReplicaIndex leader) const {
  if (leader < slow_quorums.size() && !slow_quorums[leader].empty()) return slow_quorums[leader];
  std::vector<ReplicaIndex> q;
  for (ReplicaIndex r = 0; r < slow_quorum(); ++r) q.push_back(r);
  return q;
}

std::string_view kind_name(const Message& m) {
  static constexpr std::string_view names[] = {
      "Request", "SpecOrder",        "SpecReply",   "CommitFast", "Commit",  "CommitReply",
      "ResendReq", "POM", "StartOwnerChange", "OwnerChange", "NewOwner"};
  return names[m.index()];
}

std::optional<InstanceId> instance_of(const Message& m) {
  return std::visit(
      [](const auto& msg) -> std::optional<InstanceId> {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, SpecOrderMsg>)
          return msg.order.instance;
        else if constexpr (std::is_same_v<T, SpecReplyMsg> || std::is_same_v<T, CommitFastMsg> ||
                           std::is_same_v<T, CommitMsg> || std::is_same_v<T, CommitReplyMsg>)
          return msg.instance;
        else if constexpr (std::is_same_v<T, PomMsg>)
          return msg.first.instance;
        else
          return std::nullopt;
      },
      m);
}

}  // namespace ezbft
