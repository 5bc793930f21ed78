#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "glidemini/event_log.hpp"
#include "glidemini/launcher.hpp"
#include "glidemini/metrics.hpp"
#include "glidemini/simulation.hpp"
#include "glidemini/topology.hpp"

namespace glidemini {

struct SmokeReport {
  bool pass = false;
  std::string reason;  // empty on pass
  MetricsReport metrics;
  std::vector<std::uint64_t> completed_jobs;  // sorted job ids
  std::map<std::string, std::int64_t> glidein_states;  // replayed final state -> count
  double wall_s = 0;
  std::string log_hash;

  nlohmann::json to_json() const;
};

/// Verdict over a finished run: every one of `expected_jobs` Completed and
/// every glidein in the audit trail terminal.
SmokeReport judge_smoke(const EventLog& log, std::int64_t expected_jobs);

/// Runs the built-in smoke workload in the simulator. `options.until` bounds
/// the run; reaching it without drain fails with reason "timeout".
SmokeReport smoke_test_sim(const TopologyConfig& topology, SimOptions options);

/// Brings the topology up as processes, submits the smoke workload over the
/// wire, waits for drain or `timeout`, then tears everything down.
SmokeReport smoke_test_procs(const std::filesystem::path& topology_path, const LaunchOptions& options,
                             std::chrono::seconds timeout = std::chrono::seconds(120));

/// Submits every job of `workload` to a launched deployment; returns the
/// accepted job ids. Throws LaunchError on the first rejection.
std::vector<std::uint64_t> submit_workload(const ClientContext& ctx, const WorkloadSpec& workload);

}  // namespace glidemini
