#include "glidemini/userpool.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <tuple>

namespace glidemini {

void to_json(nlohmann::json& j, const PoolSnapshot& s) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [state, n] : s.job_counts) counts[std::string(to_string(state))] = n;
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& [id, ep] : s.eps)
    eps.push_back({{"glidein_id", id.value}, {"remaining", ep.remaining}, {"retiring", ep.retiring}});
  j = nlohmann::json{{"job_counts", counts}, {"eps", eps}};
}

void from_json(const nlohmann::json& j, PoolSnapshot& s) {
  s = {};
  for (const auto& [state, n] : j.at("job_counts").items()) {
    auto st = parse_job_state(state);
    if (!st) throw std::invalid_argument("unknown job state " + state);
    s.job_counts[*st] = n.get<std::int64_t>();
  }
  for (const auto& ep : j.at("eps"))
    s.eps[GlideinId{ep.at("glidein_id").get<std::uint64_t>()}] = {ep.at("remaining").get<ResourceSpec>(),
                                                                    ep.at("retiring").get<bool>()};
}

UserPool::UserPool(PoolConfig config, std::shared_ptr<const Authority> authority)
    : config_(std::move(config)), authority_(std::move(authority)) {
  if (!authority_) throw std::invalid_argument("user pool needs an authority");
  if (config_.negotiation_period <= Duration::zero())
    throw std::invalid_argument("negotiation period must be positive");
  if (config_.ad_lifetime <= Duration::zero()) throw std::invalid_argument("ad lifetime must be positive");
}

Expected<JobId, Reject> UserPool::submit_job(const JobSpec& spec, const Token& token, SimTime now) {
  auto subject = authority_->verify(token, config_.audience, Scope::JobSubmit, now);
  if (!subject) return unexpected(subject.error());
  if (!spec.requirements.is_valid() || spec.runtime <= Duration::zero()) return unexpected(Reject::Malformed);

  Job job;
  job.job_id = JobId{next_job_id_++};
  job.owner = spec.owner.empty() ? *subject : spec.owner;
  job.submit_time = now;
  job.requirements = spec.requirements;
  job.declared_runtime = spec.runtime;
  job.fail = spec.fail;
  const auto id = job.job_id;
  jobs_.emplace(id, std::move(job));
  return id;
}

std::vector<Match> UserPool::negotiate(SimTime now) {
  if (last_negotiation_ && now < *last_negotiation_ + config_.negotiation_period)
    throw std::logic_error("negotiation invoked before its period elapsed");
  last_negotiation_ = now;

  std::vector<Job*> idle;
  for (auto& [id, job] : jobs_)
    if (job.state == JobState::Idle) idle.push_back(&job);
  std::stable_sort(idle.begin(), idle.end(), [](const Job* a, const Job* b) {
    return std::tie(a->submit_time, a->job_id) < std::tie(b->submit_time, b->job_id);
  });

  std::vector<Match> matches;
  for (auto* job : idle) {
    for (auto& [gid, ad] : ads_) {
      if (ad.retiring || !fits(job->requirements, ad.remaining)) continue;
      ad.remaining = carve(ad.remaining, job->requirements);
      job->apply(JobEvent::Matched);
      job->matched_to = gid;
      matches.push_back({job->job_id, gid});
      break;
    }
  }
  return matches;
}

std::vector<GlideinId> UserPool::expire_ads(SimTime now, std::vector<JobId>* requeued) {
  std::vector<GlideinId> removed;
  for (const auto& [id, ad] : ads_)
    if (now - ad.last_heartbeat > config_.ad_lifetime) removed.push_back(id);
  for (auto id : removed) {
    auto back = deregister(id, now);
    if (requeued) requeued->insert(requeued->end(), back.begin(), back.end());
  }
  return removed;
}

PoolSnapshot UserPool::query() const {
  PoolSnapshot s;
  for (auto st : kAllJobStates) s.job_counts[st] = 0;
  for (const auto& [id, job] : jobs_) ++s.job_counts[job.state];
  for (const auto& [id, ad] : ads_) s.eps[id] = {ad.remaining, ad.retiring};
  return s;
}

ResourceSpec UserPool::pending_claims(GlideinId id) const {
  ResourceSpec total;
  for (const auto& [jid, job] : jobs_)
    if (job.state == JobState::Matched && job.matched_to == id) total += job.requirements;
  return total;
}

void UserPool::refresh_remaining(GlideinId id, const ResourceSpec& reported) {
  auto it = ads_.find(id);
  if (it == ads_.end()) return;
  // Claims still in flight are not yet reflected in what the pilot reports.
  const auto pending = pending_claims(id);
  it->second.remaining = fits(pending, reported) ? carve(reported, pending) : ResourceSpec{};
}

void UserPool::register_ep(EpAd ad, SimTime now) {
  ad.last_heartbeat = now;
  const auto id = ad.glidein_id;
  const auto reported = ad.remaining;
  ads_.insert_or_assign(id, std::move(ad));
  refresh_remaining(id, reported);
}

Expected<void, Reject> UserPool::heartbeat(GlideinId id, const ResourceSpec& reported_remaining, bool retiring,
                                           SimTime now) {
  auto it = ads_.find(id);
  if (it == ads_.end()) return unexpected(Reject::UnknownGlidein);
  it->second.last_heartbeat = now;
  it->second.retiring = retiring;
  refresh_remaining(id, reported_remaining);
  return {};
}

std::vector<JobId> UserPool::deregister(GlideinId id, SimTime) {
  std::vector<JobId> back;
  if (ads_.erase(id) == 0) return back;
  for (auto& [jid, job] : jobs_) {
    if (job.state == JobState::Matched && job.matched_to == id) {
      job.apply(JobEvent::ClaimRefused);
      job.matched_to.reset();
      back.push_back(jid);
    }
  }
  return back;
}

Expected<void, Reject> UserPool::claim_accepted(JobId job_id, GlideinId glidein, std::uint64_t slot_id,
                                                SimTime start_time, const ResourceSpec& reported_remaining,
                                                SimTime) {
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return unexpected(Reject::UnknownJob);
  auto& job = it->second;
  if (job.state == JobState::Idle) {
    // The match was undone (ad expiry) but the pilot started the job anyway.
    job.apply(JobEvent::Matched);
    job.matched_to = glidein;
  }
  if (job.state != JobState::Matched || job.matched_to != glidein) return unexpected(Reject::UnknownJob);
  job.apply(JobEvent::Started);
  job.execution_record = ExecutionRecord{glidein, slot_id, start_time, start_time};
  refresh_remaining(glidein, reported_remaining);
  return {};
}

bool UserPool::claim_refused(JobId job_id, GlideinId glidein, std::optional<ResourceSpec> reported_remaining,
                             SimTime) {
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return false;
  auto& job = it->second;
  const bool changed = job.state == JobState::Matched && job.matched_to == glidein;
  if (changed) {
    job.apply(JobEvent::ClaimRefused);
    job.matched_to.reset();
  }
  if (reported_remaining) refresh_remaining(glidein, *reported_remaining);
  return changed;
}

Expected<JobState, Reject> UserPool::job_finished(JobId job_id, const ExecutionRecord& record, bool failed,
                                                  std::optional<ResourceSpec> reported_remaining, SimTime) {
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return unexpected(Reject::UnknownJob);
  auto& job = it->second;
  if (job.state != JobState::Running || job.matched_to != record.glidein) return unexpected(Reject::UnknownJob);
  job.apply(failed ? JobEvent::Crashed : JobEvent::Finished);
  job.execution_record = record;
  job.matched_to.reset();
  if (reported_remaining) refresh_remaining(record.glidein, *reported_remaining);
  return job.state;
}

std::map<std::string, std::int64_t> UserPool::busy_glideins(const std::string& client_id) const {
  std::set<GlideinId> busy;
  for (const auto& [jid, job] : jobs_)
    if ((job.state == JobState::Matched || job.state == JobState::Running) && job.matched_to)
      busy.insert(*job.matched_to);
  std::map<std::string, std::int64_t> out;
  for (auto id : busy) {
    auto it = ads_.find(id);
    if (it != ads_.end() && it->second.client_id == client_id) ++out[it->second.entry_id];
  }
  return out;
}

std::vector<Job> UserPool::job_list() const {
  std::vector<Job> out;
  out.reserve(jobs_.size());
  for (const auto& [id, job] : jobs_) out.push_back(job);
  return out;
}

}  // namespace glidemini
