#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glidemini/ids.hpp"
#include "glidemini/resources.hpp"
#include "glidemini/state_machine.hpp"
#include "glidemini/time.hpp"

namespace glidemini {

/// Canonical serialized form: object keys sorted lexicographically (the
/// default ordering of nlohmann::json objects), no insignificant whitespace,
/// integers in decimal. This is the input to every signature.
std::string canonical(const nlohmann::json& j);

struct ExecutionRecord {
  GlideinId glidein;
  std::uint64_t slot_id = 0;
  SimTime start_time{};
  SimTime end_time{};
  friend bool operator==(const ExecutionRecord&, const ExecutionRecord&) = default;
};

struct Job {
  JobId job_id;
  std::string owner;
  SimTime submit_time{};
  ResourceSpec requirements;
  Duration declared_runtime{};
  bool fail = false;  // simulation knob: the job ends Failed instead of Completed
  JobState state = JobState::Idle;
  std::optional<GlideinId> matched_to;  // set while Matched or Running
  std::optional<ExecutionRecord> execution_record;

  /// Applies a lifecycle event; throws IllegalTransition.
  void apply(JobEvent e) { state = transition(state, e); }
};

struct GlideinRecord {
  GlideinId glidein_id;
  std::string entry_id;
  std::string client_id;
  GlideinState state = GlideinState::Submitted;
  SimTime submit_time{};
  std::optional<ResourceSpec> detected;
  std::uint64_t jobs_served = 0;
  bool retire_requested = false;

  /// Applies a lifecycle event, maintaining "detected is present iff the
  /// glidein registered and has not failed". Throws IllegalTransition.
  void apply(GlideinEvent e, std::optional<ResourceSpec> detected_resources = std::nullopt);
};

struct EntryDescriptor {
  std::string entry_id;
  std::string ce_address;  // hostname:port
  std::string audience;
  std::int64_t max_pressure = 1;
  std::int64_t max_submit_per_cycle = 1;
  std::vector<std::string> trusted_clients;

  /// Throws std::invalid_argument when the limits are out of range.
  void validate() const;
  bool trusts(const std::string& client_id) const;
};

void to_json(nlohmann::json& j, const ExecutionRecord& r);
void from_json(const nlohmann::json& j, ExecutionRecord& r);
void to_json(nlohmann::json& j, const Job& job);
void to_json(nlohmann::json& j, const GlideinRecord& g);
void to_json(nlohmann::json& j, const EntryDescriptor& e);
void from_json(const nlohmann::json& j, EntryDescriptor& e);

}  // namespace glidemini
