#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "ezbft/harness.hpp"

namespace ezbft::harness {

const RegionSummary* MetricsReport::region(const std::string& name) const {
  for (const auto& r : regions)
    if (r.region == name) return &r;
  return nullptr;
}

std::string MetricsReport::to_jsonl() const {
  std::string out;
  for (const auto& c : commands) {
    nlohmann::ordered_json j;
    j["type"] = "command";
    j["id"] = c.id.client.str() + "/" + std::to_string(c.id.t);
    j["client"] = c.client;
    j["region"] = c.region;
    j["submit_us"] = c.submitted;
    j["deliver_us"] = c.delivered;
    j["latency_ms"] = static_cast<double>(c.delivered - c.submitted) / kMillisecond;
    j["path"] = c.path == CommitPath::fast ? "fast" : "slow";
    j["steps"] = c.steps;
    j["instance"] = c.instance.str();
    out += j.dump() + '\n';
  }
  nlohmann::ordered_json s;
  s["type"] = "summary";
  nlohmann::ordered_json regions_json = nlohmann::ordered_json::array();
  for (const auto& r : regions)
    regions_json.push_back({{"region", r.region},
                            {"count", r.count},
                            {"mean_ms", r.mean_ms},
                            {"median_ms", r.median_ms},
                            {"p99_ms", r.p99_ms}});
  s["regions"] = regions_json;
  s["mean_latency_ms"] = mean_latency_ms;
  s["fast_ratio"] = fast_ratio;
  s["throughput_per_s"] = throughput;
  s["owner_changes"] = owner_changes;
  s["rollbacks"] = rollbacks;
  s["submitted"] = submitted;
  s["delivered"] = delivered;
  s["undelivered"] = undelivered;
  out += s.dump() + '\n';
  return out;
}

double ezbft_fast_latency(const Scenario& s, ReplicaIndex region, ReplicaIndex home) {
  const auto& d = s.latency_ms;
  double worst = 0;
  for (ReplicaIndex j = 0; j < s.n; ++j) worst = std::max(worst, d[home][j] + d[j][region]);
  return d[region][home] + worst;
}

double primary_latency(const Scenario& s, ReplicaIndex region, ReplicaIndex primary) {
  return ezbft_fast_latency(s, region, primary);
}

std::vector<CompareRow> compare(const Scenario& s, const MetricsReport& m) {
  std::vector<CompareRow> rows;
  const ReplicaIndex primary = s.compare_primary.value_or(0);
  for (ReplicaIndex r = 0; r < s.n; ++r) {
    CompareRow row;
    row.region = s.region_name(r);
    row.ezbft_model_ms = ezbft_fast_latency(s, r, r);
    const auto* sim = m.region(row.region);
    row.ezbft_sim_ms = sim ? sim->mean_ms : std::numeric_limits<double>::quiet_NaN();
    row.primary_ms = primary_latency(s, r, primary);
    rows.push_back(row);
  }
  return rows;
}

std::string format_compare(const std::vector<CompareRow>& rows, ReplicaIndex primary,
                           const Scenario& s) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  out << "primary model at " << s.region_name(primary) << "\n";
  out << std::left << std::setw(8) << "region" << std::right << std::setw(12) << "ezbft_sim"
      << std::setw(12) << "ezbft_model" << std::setw(12) << "primary" << std::setw(10) << "gain%"
      << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(8) << r.region << std::right << std::setw(12);
    if (std::isnan(r.ezbft_sim_ms))
      out << "-";
    else
      out << r.ezbft_sim_ms;
    const double ez = std::isnan(r.ezbft_sim_ms) ? r.ezbft_model_ms : r.ezbft_sim_ms;
    out << std::setw(12) << r.ezbft_model_ms << std::setw(12) << r.primary_ms << std::setw(10)
        << (r.primary_ms > 0 ? 100.0 * (r.primary_ms - ez) / r.primary_ms : 0.0) << "\n";
  }
  return out.str();
}

}  // namespace ezbft::harness
