#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "ezbft/byzantine.hpp"
#include "ezbft/client.hpp"
#include "ezbft/replica.hpp"
#include "ezbft/simnet.hpp"

namespace ezbft::harness {

// --- scenario -----------------------------------------------------------------

struct ClientSpec {
  ReplicaIndex home = 0;
  /// Replica whose site the client shares; its delay to replica j is
  /// latency[region][j] + offset.
  ReplicaIndex region = 0;
  double offset_ms = 0;
  std::size_t requests = 1;
  std::size_t key_space = 16;
  double conflict_rate = 0;
  double start_ms = 0;
  double think_ms = 0;
  /// Explicit commands; when non-empty they replace the generated workload.
  std::vector<Command> commands;
};

enum class Behavior : std::uint8_t { crash, mute, equivocate, lie_deps, delay, drop, partition };

std::string_view behavior_name(Behavior b);

struct FaultSpec {
  NodeId target;
  Behavior behavior = Behavior::crash;
  double at_ms = 0;
  double from_ms = 0;
  double until_ms = -1;  // negative: open-ended
  double extra_ms = 0;
  double probability = 1.0;
  bool inbound = false;
  /// equivocate: replicas receiving the second SpecOrder.
  std::vector<ReplicaIndex> group;
  std::size_t limit = 1;

  /// Crash, mute, equivocate and lie-deps make a replica faulty; link
  /// faults leave it correct.
  bool byzantine() const;
};

struct TimerSpec {
  std::optional<double> slow_ms;
  std::optional<double> retransmit_ms;
  double resend_ms = 600;
  double buffer_ms = 600;
  double owner_change_ms = 1200;
};

struct Scenario {
  std::string name;
  std::uint32_t n = 4;
  std::uint32_t f = 1;
  std::uint64_t seed = 1;
  double time_limit_ms = 10'000;
  std::uint64_t checkpoint_interval = 128;
  std::uint32_t owner_change_quorum = 0;
  bool allow_out_of_model = false;
  std::string signatures = "keyed";
  RollbackMode rollback = RollbackMode::partial;
  std::vector<std::string> regions;
  std::vector<std::vector<double>> latency_ms;
  double jitter_ms = 0;
  std::vector<std::vector<ReplicaIndex>> slow_quorums;
  TimerSpec timers;
  std::vector<ClientSpec> clients;
  std::vector<FaultSpec> faults;
  std::optional<ReplicaIndex> compare_primary;

  std::set<ReplicaIndex> faulty_replicas() const;
  bool out_of_model() const { return faulty_replicas().size() > f; }
  std::string region_name(ReplicaIndex r) const;
};

struct ScenarioError : std::runtime_error {
  enum class Kind : std::uint8_t { parse, invalid } kind;
  ScenarioError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
};

/// Parses the INI-style scenario text. Throws ScenarioError(parse) on syntax
/// or type errors and ScenarioError(invalid) when validate() fails.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
/// Semantic checks: N = 3f+1, square non-negative matrix, quorums, client
/// and fault targets in range, at most f faulty replicas unless allowed.
void validate(const Scenario& s);

/// The commands client `index` will submit, in order. Deterministic in
/// (scenario seed, index); a command draws the shared hot key when its
/// uniform draw falls below the conflict rate, so raising the rate only
/// turns more of the same commands hot.
std::vector<Command> workload(const Scenario& s, std::size_t index);

// --- invariants -----------------------------------------------------------------

struct Violation {
  std::string property;
  std::string message;
  std::string line;
};

/// Online checker over trace lines. Nontriviality, Consistency and
/// Stability are decided incrementally; Liveness at finish().
class InvariantMonitor {
 public:
  explicit InvariantMonitor(std::set<NodeId> faulty = {}) : faulty_(std::move(faulty)) {}

  void feed(const std::string& line);
  void finish();

  const std::vector<Violation>& violations() const { return violations_; }
  bool ok() const { return violations_.empty(); }
  /// First violation of `property`, if any.
  const Violation* first(std::string_view property) const;

 private:
  struct Fact {
    std::string client;
    std::string t;
    std::string cmd;
    bool operator==(const Fact&) const = default;
  };
  void report(std::string property, std::string message, const std::string& line);

  std::set<NodeId> faulty_;
  std::set<std::tuple<std::string, std::string, std::string>> submitted_;
  std::map<std::pair<std::string, std::string>, std::string> pending_;  // (client, t) -> submit line
  std::map<std::string, std::pair<Fact, std::string>> final_at_;         // instance -> first final
  std::map<std::pair<std::string, std::string>, std::string> committed_; // (replica, instance) -> record
  std::set<std::string> reported_;
  std::vector<Violation> violations_;
};

/// Replays a saved trace through a monitor; faulty nodes come from the
/// "# faulty=" header.
InvariantMonitor check_trace(const std::string& trace);

// --- metrics --------------------------------------------------------------------

struct CommandMetric {
  CommandId id;
  std::size_t client = 0;
  std::string region;
  Time submitted = 0;
  Time delivered = 0;
  CommitPath path = CommitPath::fast;
  int steps = 0;
  InstanceId instance;
};

struct RegionSummary {
  std::string region;
  std::size_t count = 0;
  double mean_ms = 0;
  double median_ms = 0;
  double p99_ms = 0;
};

struct MetricsReport {
  std::vector<CommandMetric> commands;
  std::vector<RegionSummary> regions;
  double fast_ratio = 0;
  double throughput = 0;  // delivered commands per simulated second
  std::size_t owner_changes = 0;
  std::size_t rollbacks = 0;
  std::size_t submitted = 0;
  std::size_t delivered = 0;
  std::size_t undelivered = 0;
  double mean_latency_ms = 0;

  const RegionSummary* region(const std::string& name) const;
  /// One JSON object per command, then {"type":"summary",...}.
  std::string to_jsonl() const;
};

// --- running --------------------------------------------------------------------

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<double> time_limit_ms;
};

struct RunResult {
  Scenario scenario;
  std::unique_ptr<Simulator> sim;
  /// Indexed by replica; faulty ones point into their wrapper.
  std::vector<Replica*> replicas;
  std::vector<Client*> clients;
  std::vector<ByzantineReplica*> wrappers;
  std::set<ReplicaIndex> faulty;
  InvariantMonitor monitor;
  MetricsReport metrics;
  bool out_of_model = false;

  bool correct(ReplicaIndex r) const { return !faulty.count(r); }
  const std::string& trace() const { return sim->trace(); }
  std::string trace_digest_hex() const;
};

/// Builds the cluster, runs to quiescence or the time limit, checks the
/// invariants and computes the metrics.
RunResult run_scenario(const Scenario& s, const RunOptions& opts = {});

/// Client timer defaults derived from the matrix: the slow-path deadline
/// covers the worst fast round trip from the client's site, and the
/// retransmission deadline is six times that.
Time default_slow_timeout(const Scenario& s, const ClientSpec& c);

// --- latency model comparison ------------------------------------------------------

struct CompareRow {
  std::string region;
  double ezbft_model_ms = 0;  // closed-form fast path with a local home replica
  double ezbft_sim_ms = 0;    // simulated mean, NaN without deliveries
  double primary_ms = 0;      // analytic primary-based three-step latency
};

/// Fast path from region r with home h: d(r,h) + max_j (d(h,j) + d(j,r)).
double ezbft_fast_latency(const Scenario& s, ReplicaIndex region, ReplicaIndex home);
/// Primary p: d(r,p) + max_j (d(p,j) + d(j,r)).
double primary_latency(const Scenario& s, ReplicaIndex region, ReplicaIndex primary);

std::vector<CompareRow> compare(const Scenario& s, const MetricsReport& m);
std::string format_compare(const std::vector<CompareRow>& rows, ReplicaIndex primary,
                           const Scenario& s);

}  // namespace ezbft::harness
