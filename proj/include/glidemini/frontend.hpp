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

/// Positive rational, kept exact so requests are integer-reproducible.
struct Rational {
  std::int64_t num = 1;
  std::int64_t den = 1;

  /// ceil(n * num / den) for n >= 0.
  std::int64_t ceil_mul(std::int64_t n) const;
  /// Accepts "3/2", "2", or a JSON number with up to three decimals.
  static Rational parse(const nlohmann::json& j);
  std::string str() const;
};

struct FrontendEntry {
  std::string entry_id;
  ResourceSpec node_advertised;
  std::string mailbox_address;
};

struct FrontendConfig {
  std::string client_id;
  std::vector<FrontendEntry> entries;
  std::int64_t max_pressure_per_entry = 8;
  std::int64_t total_max_glideins = 100;
  std::int64_t total_curb_glideins = 50;
  Rational expansion_factor;
  Duration cycle_period = secs(2);
  Token credential;     // compute.create for the CE, forwarded in requests
  Token mailbox_token;  // mailbox.write for the Factory
  Duration credential_ttl = secs(24 * 3600);

  /// Throws std::invalid_argument on inconsistent limits.
  void validate() const;
};

struct MatchCounts {
  std::int64_t idle = 0;
  std::int64_t running = 0;
  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

MatchCounts count_matching(std::span<const Job> jobs, const ResourceSpec& node_advertised);

struct ProvisioningRequest {
  std::int64_t req_pressure = 0;
  std::int64_t req_max_run = 0;
  friend bool operator==(const ProvisioningRequest&, const ProvisioningRequest&) = default;
};

/// The request heuristic: ask for enough pilots to cover the idle jobs plus
/// those already busy, capped per entry, and stop growing past the curb.
ProvisioningRequest compute_request(std::int64_t matching_idle, std::int64_t busy_glideins,
                                    std::int64_t total_glideins, const FrontendConfig& config);

/// What the frontend observes at the start of a cycle.
struct FrontendInputs {
  std::span<const Job> jobs;
  std::map<std::string, std::int64_t> busy_glideins;  // entry_id -> this client's busy pilots
  std::vector<FactoryStatusMessage> statuses;
};

struct PlannedRequest {
  std::string mailbox_address;
  RequestMessage message;
  std::int64_t matching_idle = 0;
};

/// Client-side provisioning state: per-entry sequence numbers and credentials.
class Frontend {
 public:
  Frontend(FrontendConfig config, std::shared_ptr<Authority> authority);

  /// Builds one signed request per known entry, in entry_id order, each with
  /// seq = last accepted seq + 1. Refreshes credentials that are in their
  /// last quarter of validity. Throws std::logic_error if called before the
  /// previous cycle + cycle_period.
  std::vector<PlannedRequest> cycle(const FrontendInputs& inputs, SimTime now);

  /// Records the outcome of a put. Only an accepted put advances the seq; a
  /// stale-sequence rejection fast-forwards to the mailbox's stored seq.
  void on_put_accepted(const std::string& entry_id, std::uint64_t seq);
  void on_put_stale(const std::string& entry_id, std::optional<std::uint64_t> stored_seq);

  /// Seq of the last accepted put for an entry, if any.
  std::optional<std::uint64_t> last_seq(const std::string& entry_id) const;

  const FrontendConfig& config() const { return config_; }

 private:
  FrontendConfig config_;
  std::shared_ptr<Authority> authority_;
  std::map<std::string, std::uint64_t> acked_seq_;
  std::optional<SimTime> last_cycle_;
};

}  // namespace glidemini
