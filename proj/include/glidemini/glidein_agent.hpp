#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "glidemini/expected.hpp"
#include "glidemini/ids.hpp"
#include "glidemini/reject.hpp"
#include "glidemini/resources.hpp"
#include "glidemini/state_machine.hpp"
#include "glidemini/time.hpp"

namespace glidemini {

struct GlideinPolicy {
  Duration max_lifetime = secs(3600);
  Duration idle_timeout = secs(30);
  Duration poll_period = secs(2);
  int max_registration_failures = 3;
};

struct ClaimRequest {
  JobId job_id;
  ResourceSpec requirements;
  Duration runtime{};
  bool fail = false;
};

struct DynamicSlot {
  std::uint64_t slot_id = 0;
  JobId job_id;
  ResourceSpec carved;
  SimTime start_time{};
  SimTime end_time{};
  bool fail = false;
};

struct FinishedSlot {
  DynamicSlot slot;
  bool went_idle = false;  // the last slot finished and the pilot is Registered again
};

enum class RetireReason { IdleTimeout, MaxLifetime, FactoryRequest };
std::string_view to_string(RetireReason r);

struct PollResult {
  bool heartbeat = false;
  bool resend_registration = false;
  std::optional<RetireReason> began_retiring;
  bool done = false;
};

/// The pilot running on one node: registers a single partitionable slot of
/// the node's advertised size and carves a dynamic slot per claimed job.
///
/// Invariant: remaining() + sum of carved slots == detected() after every
/// operation.
class GlideinAgent {
 public:
  GlideinAgent(GlideinId id, std::string client_id, std::string entry_id, GlideinPolicy policy);

  /// Validation and resource detection. On success the pilot is Registered
  /// with detected = node_advertised, pending confirmation from the pool.
  GlideinState startup(const ResourceSpec& node_advertised, bool fail, SimTime now);

  bool registration_pending() const { return registration_pending_; }
  void registration_confirmed(SimTime now);
  /// Counts a consecutive registration failure; the pilot fails after
  /// policy.max_registration_failures of them.
  GlideinState registration_failed(SimTime now);

  Expected<std::uint64_t, Reject> claim(const ClaimRequest& req, SimTime now);

  /// Releases a slot whose job has reached its end time. Throws
  /// std::logic_error if now precedes the slot's end time.
  Expected<FinishedSlot, Reject> complete(std::uint64_t slot_id, SimTime now);

  PollResult poll(SimTime now);

  /// Stops accepting claims; running slots drain. Returns false if the pilot
  /// was not in a state that can retire.
  bool retire(RetireReason reason, SimTime now);

  GlideinId id() const { return id_; }
  const std::string& client_id() const { return client_id_; }
  const std::string& entry_id() const { return entry_id_; }
  GlideinState state() const { return state_; }
  const ResourceSpec& detected() const { return detected_; }
  const ResourceSpec& remaining() const { return remaining_; }
  const std::map<std::uint64_t, DynamicSlot>& slots() const { return slots_; }
  std::uint64_t jobs_served() const { return jobs_served_; }
  SimTime last_busy_time() const { return last_busy_time_; }
  std::optional<SimTime> started_at() const { return started_at_; }
  std::optional<RetireReason> retire_reason() const { return retire_reason_; }
  const GlideinPolicy& policy() const { return policy_; }

  bool conserves_resources() const;

 private:
  GlideinId id_;
  std::string client_id_;
  std::string entry_id_;
  GlideinPolicy policy_;
  GlideinState state_ = GlideinState::Starting;
  ResourceSpec detected_;
  ResourceSpec remaining_;
  std::map<std::uint64_t, DynamicSlot> slots_;
  std::uint64_t next_slot_id_ = 1;
  std::uint64_t jobs_served_ = 0;
  SimTime last_busy_time_{};
  std::optional<SimTime> started_at_;
  std::optional<SimTime> last_poll_;
  bool registration_pending_ = false;
  int registration_failures_ = 0;
  std::optional<RetireReason> retire_reason_;
};

}  // namespace glidemini
