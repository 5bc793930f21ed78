#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glidemini/credentials.hpp"
#include "glidemini/mailbox.hpp"
#include "glidemini/model.hpp"

namespace glidemini {

/// Glideins to submit this cycle so that pressure approaches `req_pressure`
/// without exceeding either limit. Never negative.
std::int64_t compute_submission(std::int64_t req_pressure, std::int64_t current_pressure, std::int64_t max_pressure,
                                std::int64_t max_submit_per_cycle);

/// Picks which of a client's Registered/Running glideins to retire so that at
/// most `req_max_run` remain. Preference: fewest jobs served, then latest
/// submit time, then largest glidein id. Result is sorted by id.
std::vector<GlideinId> compute_retirements(std::int64_t req_max_run, std::span<const GlideinRecord> candidates);

struct FactoryConfig {
  std::string audience;  // mailbox audience, normally the Factory hostname
  std::vector<EntryDescriptor> entries;
  Duration cycle_period = secs(2);
  Duration request_ttl = secs(60);
};

struct Submission {
  GlideinId glidein_id;
  std::string entry_id;
  std::string client_id;
  Token credential;
};

struct AuthFailure {
  std::string entry_id;
  std::string client_id;
  Reject reason;
};

struct ActionSet {
  std::vector<Submission> submissions;
  std::vector<GlideinId> retirements;
  std::vector<FactoryStatusMessage> statuses;
  std::vector<AuthFailure> auth_failures;
};

class Factory {
 public:
  Factory(FactoryConfig config, std::shared_ptr<const Authority> authority);

  /// One control-loop pass over every entry in lexicographic order. Creates
  /// Submitted records for new pilots, marks retirements, and publishes one
  /// status per entry. Throws std::logic_error if called before
  /// previous + cycle_period.
  ActionSet cycle(SimTime now);

  /// Applies a CE/pool notification to the glidein's record.
  /// Throws IllegalTransition, or std::out_of_range for unknown ids.
  const GlideinRecord& handle_glidein_event(GlideinId id, GlideinEvent event, SimTime now,
                                            std::optional<ResourceSpec> detected = std::nullopt,
                                            std::optional<std::uint64_t> jobs_served = std::nullopt);

  /// Queued-plus-running glideins at an entry (all clients, or one client).
  std::int64_t pressure(const std::string& entry_id) const;
  std::int64_t pressure(const std::string& entry_id, const std::string& client_id) const;

  Mailbox& mailbox() { return mailbox_; }
  const Mailbox& mailbox() const { return mailbox_; }
  const std::map<GlideinId, GlideinRecord>& glideins() const { return glideins_; }
  const std::map<std::string, EntryDescriptor>& entries() const { return entries_; }
  const FactoryConfig& config() const { return config_; }
  std::uint64_t auth_failures() const { return auth_failures_; }
  std::optional<SimTime> last_cycle() const { return last_cycle_; }

 private:
  FactoryStatusMessage status_for(const EntryDescriptor& entry, SimTime now) const;

  FactoryConfig config_;
  std::shared_ptr<const Authority> authority_;
  std::map<std::string, EntryDescriptor> entries_;
  std::map<GlideinId, GlideinRecord> glideins_;
  Mailbox mailbox_;
  std::uint64_t next_glidein_seq_ = 1;
  std::uint64_t status_seq_ = 0;
  std::uint64_t auth_failures_ = 0;
  std::optional<SimTime> last_cycle_;
};

}  // namespace glidemini
