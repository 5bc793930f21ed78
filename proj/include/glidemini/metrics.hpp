#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "glidemini/audit.hpp"
#include "glidemini/event_log.hpp"
#include "glidemini/model.hpp"

namespace glidemini {

// Audit detail fields read back here (times in ms):
//   job submitted   {owner, requirements, runtime_ms}
//   job claimed     {glidein}
//   job queued      {reason}
//   job started     {glidein, slot, start}
//   job completed / failed   {glidein, slot, start, end}
//   glidein submitted {client, entry}; assigned {node}; validated/registered {detected}
//   glidein retiring {reason}; done {jobs_served}; failed {reason}

/// Entity states rebuilt from audit records alone.
struct AuditReplay {
  struct JobView {
    JobState state = JobState::Idle;
    SimTime submitted{};
    std::optional<GlideinId> glidein;
    std::vector<ExecutionRecord> executions;  // one per completed/failed record
  };
  struct GlideinView {
    GlideinState state = GlideinState::Submitted;
    std::optional<SimTime> submitted;
    std::optional<SimTime> registered;
    std::optional<SimTime> terminal;
    bool registered_ever = false;
    std::set<JobId> open_jobs;
    std::map<JobId, SimTime> open_starts;
    std::vector<std::pair<SimTime, SimTime>> slot_intervals;
  };
  std::map<JobId, JobView> jobs;
  std::map<GlideinId, GlideinView> glideins;
  std::int64_t auth_failures = 0;
  SimTime last_time{};
};

/// Throws MalformedLog on records that do not decode or that describe an
/// impossible transition.
AuditReplay replay_audit(const EventLog& log);

struct GlideinMetrics {
  std::string state;
  double startup_s = 0;  // submitted -> registered
  double busy_s = 0;     // measure of the union of slot intervals
  double slot_busy_s = 0;  // sum of slot intervals (parallel slots add up)
  double idle_s = 0;     // registered time minus busy_s
  std::int64_t jobs = 0;
  bool registered = false;
  friend bool operator==(const GlideinMetrics&, const GlideinMetrics&) = default;
};

struct MetricsReport {
  std::int64_t jobs_submitted = 0;
  std::int64_t jobs_completed = 0;
  std::int64_t jobs_failed = 0;
  std::int64_t jobs_removed = 0;
  double makespan_s = 0;
  std::int64_t peak_running_jobs = 0;
  std::int64_t peak_running_glideins = 0;  // glideins with at least one busy slot
  std::int64_t peak_active_glideins = 0;   // registered and not yet terminal
  std::map<GlideinId, GlideinMetrics> glideins;
  std::map<std::string, std::int64_t> glideins_by_terminal_state;
  std::int64_t failed_before_registration = 0;
  std::int64_t auth_failures = 0;
  double total_busy_s = 0;
  double total_idle_s = 0;
  double total_startup_s = 0;
  double max_waste_s = 0;

  nlohmann::json to_json() const;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Pure function of the log. Non-terminal glideins are measured up to the
/// last entry's time.
MetricsReport metrics_report(const EventLog& log);

/// Measure of the union of half-open intervals.
Duration union_measure(std::vector<std::pair<SimTime, SimTime>> intervals);

}  // namespace glidemini
