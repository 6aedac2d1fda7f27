#include "ezbft/kv.hpp"

#include <charconv>
#include <sstream>

namespace ezbft {

std::string to_string(const Command& cmd) {
  switch (cmd.op) {
    case OpKind::get:
      return "get " + cmd.key;
    case OpKind::put:
      return "put " + cmd.key + " " + std::to_string(cmd.value);
    case OpKind::increment:
      return "inc " + cmd.key + " " + std::to_string(cmd.value);
  }
  return "?";
}

bool parse_command(std::string_view text, Command& out) {
  std::istringstream in{std::string(text)};
  std::string op, key, value, extra;
  if (!(in >> op >> key)) return false;
  std::int64_t v = 0;
  if (in >> value) {
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) return false;
  }
  if (in >> extra) return false;
  if (op == "get") {
    if (!value.empty()) return false;
    out = Command::get(key);
  } else if (op == "put") {
    if (value.empty()) return false;
    out = Command::put(key, v);
  } else if (op == "inc") {
    out = Command::increment(key, value.empty() ? 1 : v);
  } else {
    return false;
  }
  return true;
}

std::string command_token(const Command& cmd) {
  std::string s = to_string(cmd);
  for (auto& ch : s)
    if (ch == ' ') ch = ':';
  return s;
}

bool parse_command_token(std::string_view token, Command& out) {
  std::string s(token);
  for (auto& ch : s)
    if (ch == ':') ch = ' ';
  return parse_command(s, out);
}

std::string to_string(const Reply& rep) {
  return rep ? std::to_string(*rep) : std::string("-");
}

bool interferes(const Command& a, const Command& b) {
  if (a.key != b.key) return false;
  if (a.op == OpKind::get && b.op == OpKind::get) return false;
  if (a.op == OpKind::increment && b.op == OpKind::increment) return false;
  return true;
}

std::optional<std::int64_t> KVState::read(const std::string& key, ExecMode mode) const {
  if (mode == ExecMode::speculative) {
    if (auto it = overlay_.find(key); it != overlay_.end()) return it->second;
  }
  if (auto it = final_.find(key); it != final_.end()) return it->second;
  return std::nullopt;
}

Reply KVState::apply(const Command& cmd, ExecMode mode) {
  const auto current = read(cmd.key, mode);
  std::optional<std::int64_t> next;
  Reply rep;
  switch (cmd.op) {
    case OpKind::get:
      rep = current;
      break;
    case OpKind::put:
      rep = current;
      next = cmd.value;
      break;
    case OpKind::increment:
      next = current.value_or(0) + cmd.value;
      break;
  }

  if (mode == ExecMode::final) {
    if (next) final_[cmd.key] = *next;
    return rep;
  }

  Undo undo{cmd.key, next.has_value(), std::nullopt};
  if (next) {
    if (auto it = overlay_.find(cmd.key); it != overlay_.end()) undo.prior = it->second;
    overlay_[cmd.key] = *next;
  }
  undo_.push_back(std::move(undo));
  return rep;
}

void KVState::rollback_to(std::size_t depth) {
  while (undo_.size() > depth) {
    Undo& u = undo_.back();
    if (u.wrote) {
      if (u.prior)
        overlay_[u.key] = *u.prior;
      else
        overlay_.erase(u.key);
    }
    undo_.pop_back();
  }
}

KVState::Map KVState::visible_state() const {
  Map out = final_;
  for (const auto& [k, v] : overlay_) out[k] = v;
  return out;
}

}  // namespace ezbft
