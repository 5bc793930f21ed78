#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "glidemini/credentials.hpp"
#include "glidemini/expected.hpp"
#include "glidemini/model.hpp"

namespace glidemini {

struct JobSpec {
  std::string owner;
  ResourceSpec requirements;
  Duration runtime{};
  bool fail = false;
};

/// Collector view of one execution point (a registered glidein).
struct EpAd {
  GlideinId glidein_id;
  std::string client_id;
  std::string entry_id;
  std::string address;  // where claims for this glidein are sent
  ResourceSpec detected;
  ResourceSpec remaining;
  SimTime last_heartbeat{};
  bool retiring = false;
};

struct Match {
  JobId job_id;
  GlideinId glidein_id;
  friend bool operator==(const Match&, const Match&) = default;
};

struct PoolSnapshot {
  struct EpView {
    ResourceSpec remaining;
    bool retiring = false;
    friend bool operator==(const EpView&, const EpView&) = default;
  };
  std::map<JobState, std::int64_t> job_counts;
  std::map<GlideinId, EpView> eps;
  friend bool operator==(const PoolSnapshot&, const PoolSnapshot&) = default;
};

void to_json(nlohmann::json& j, const PoolSnapshot& s);
void from_json(const nlohmann::json& j, PoolSnapshot& s);

struct PoolConfig {
  std::string audience;  // job.submit tokens must name this
  Duration negotiation_period = secs(2);
  Duration ad_lifetime = secs(10);
};

/// Elastic pool: access point, collector and negotiator in one event loop.
class UserPool {
 public:
  UserPool(PoolConfig config, std::shared_ptr<const Authority> authority);

  Expected<JobId, Reject> submit_job(const JobSpec& spec, const Token& token, SimTime now);

  /// FIFO by (submit_time, job_id) over Idle jobs; each job takes the first
  /// non-retiring ad (by glidein_id) it fits, deducting provisionally so one
  /// pass can pack several jobs onto one pilot. Matched jobs move to Matched.
  /// Throws std::logic_error if called before previous + negotiation_period.
  std::vector<Match> negotiate(SimTime now);

  /// Drops ads whose last heartbeat is older than ad_lifetime; their pending
  /// (Matched) jobs return to Idle. Returns the removed glidein ids.
  std::vector<GlideinId> expire_ads(SimTime now, std::vector<JobId>* requeued = nullptr);

  PoolSnapshot query() const;

  void register_ep(EpAd ad, SimTime now);
  Expected<void, Reject> heartbeat(GlideinId id, const ResourceSpec& reported_remaining, bool retiring, SimTime now);
  /// Removes the ad; returns jobs that were Matched to it and are Idle again.
  std::vector<JobId> deregister(GlideinId id, SimTime now);

  Expected<void, Reject> claim_accepted(JobId job, GlideinId glidein, std::uint64_t slot_id, SimTime start_time,
                                        const ResourceSpec& reported_remaining, SimTime now);
  /// The job returns to Idle if it was still Matched to `glidein`; returns
  /// false if the refusal was stale and changed nothing.
  bool claim_refused(JobId job, GlideinId glidein, std::optional<ResourceSpec> reported_remaining, SimTime now);
  Expected<JobState, Reject> job_finished(JobId job, const ExecutionRecord& record, bool failed,
                                          std::optional<ResourceSpec> reported_remaining, SimTime now);

  /// Per entry, how many of `client_id`'s pilots hold at least one Matched
  /// or Running job.
  std::map<std::string, std::int64_t> busy_glideins(const std::string& client_id) const;

  const std::map<JobId, Job>& jobs() const { return jobs_; }
  std::vector<Job> job_list() const;
  const std::map<GlideinId, EpAd>& ads() const { return ads_; }
  const PoolConfig& config() const { return config_; }

 private:
  ResourceSpec pending_claims(GlideinId id) const;
  void refresh_remaining(GlideinId id, const ResourceSpec& reported);

  PoolConfig config_;
  std::shared_ptr<const Authority> authority_;
  std::map<JobId, Job> jobs_;
  std::map<GlideinId, EpAd> ads_;
  std::uint64_t next_job_id_ = 1;
  std::optional<SimTime> last_negotiation_;
};

}  // namespace glidemini
