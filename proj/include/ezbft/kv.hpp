#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ezbft/crypto.hpp"

namespace ezbft {

enum class OpKind : std::uint8_t { get = 0, put = 1, increment = 2 };

/// One key-value operation. `value` is the written value for put and the
/// delta for increment; get ignores it.
struct Command {
  OpKind op = OpKind::get;
  std::string key;
  std::int64_t value = 0;

  static Command get(std::string key) { return {OpKind::get, std::move(key), 0}; }
  static Command put(std::string key, std::int64_t v) { return {OpKind::put, std::move(key), v}; }
  static Command increment(std::string key, std::int64_t d = 1) {
    return {OpKind::increment, std::move(key), d};
  }

  bool operator==(const Command&) const = default;
};

/// "put x 1", "get x", "inc x 1"
std::string to_string(const Command& cmd);
bool parse_command(std::string_view text, Command& out);

/// Whitespace-free form for trace records: "put:x:1", "get:x", "inc:x:1".
/// Keys must not contain ':' or whitespace for the token to parse back.
std::string command_token(const Command& cmd);
bool parse_command_token(std::string_view token, Command& out);

/// Client-unique identity of a submitted command.
struct CommandId {
  NodeId client;
  std::uint64_t t = 0;
  auto operator<=>(const CommandId&) const = default;
};

/// Result handed back to the client. Missing keys and acknowledgements are
/// the empty value.
using Reply = std::optional<std::int64_t>;

std::string to_string(const Reply& rep);

/// Two commands interfere when executing them in the two possible orders can
/// produce a different state or different replies. Decided from (op, key) only.
bool interferes(const Command& a, const Command& b);

enum class ExecMode : std::uint8_t { speculative, final };

/// Replicated key-value store with a committed (final) version and a
/// speculative overlay that can be rolled back entry by entry.
///
/// put returns the previous value, get the current one, increment an empty
/// acknowledgement (so two increments commute in replies as well as state).
class KVState {
 public:
  using Map = std::map<std::string, std::int64_t>;

  Reply apply(const Command& cmd, ExecMode mode);

  /// Drop every speculative application.
  void rollback() { rollback_to(0); }
  /// Keep only the first `depth` speculative applications.
  void rollback_to(std::size_t depth);
  std::size_t speculative_depth() const { return undo_.size(); }

  std::optional<std::int64_t> read(const std::string& key, ExecMode mode) const;

  const Map& final_state() const { return final_; }
  /// Final state with the speculative overlay applied.
  Map visible_state() const;

 private:
  struct Undo {
    std::string key;
    bool wrote = false;
    std::optional<std::int64_t> prior;  // overlay entry before the write
  };

  Map final_;
  Map overlay_;
  std::vector<Undo> undo_;
};

}  // namespace ezbft
