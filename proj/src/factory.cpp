#include "glidemini/factory.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace glidemini {

std::int64_t compute_submission(std::int64_t req_pressure, std::int64_t current_pressure, std::int64_t max_pressure,
                                std::int64_t max_submit_per_cycle) {
  const auto n = std::min({req_pressure - current_pressure, max_submit_per_cycle, max_pressure - current_pressure});
  return std::max<std::int64_t>(0, n);
}

std::vector<GlideinId> compute_retirements(std::int64_t req_max_run, std::span<const GlideinRecord> candidates) {
  const auto count = static_cast<std::int64_t>(candidates.size());
  if (count <= req_max_run) return {};

  std::vector<const GlideinRecord*> order;
  order.reserve(candidates.size());
  for (const auto& g : candidates) order.push_back(&g);
  std::sort(order.begin(), order.end(), [](const GlideinRecord* a, const GlideinRecord* b) {
    // fewest jobs first, then newest, then largest id
    return std::tuple(a->jobs_served, b->submit_time, b->glidein_id) <
           std::tuple(b->jobs_served, a->submit_time, a->glidein_id);
  });

  const auto excess = count - std::max<std::int64_t>(0, req_max_run);
  std::vector<GlideinId> out;
  for (std::int64_t i = 0; i < excess; ++i) out.push_back(order[static_cast<std::size_t>(i)]->glidein_id);
  std::sort(out.begin(), out.end());
  return out;
}

Factory::Factory(FactoryConfig config, std::shared_ptr<const Authority> authority)
    : config_(std::move(config)), authority_(std::move(authority)), mailbox_(config_.audience) {
  if (!authority_) throw std::invalid_argument("factory needs an authority");
  if (config_.cycle_period <= Duration::zero()) throw std::invalid_argument("factory cycle period must be positive");
  for (const auto& e : config_.entries) {
    e.validate();
    if (!entries_.emplace(e.entry_id, e).second) throw std::invalid_argument("duplicate entry " + e.entry_id);
  }
}

std::int64_t Factory::pressure(const std::string& entry_id) const {
  return std::count_if(glideins_.begin(), glideins_.end(), [&](const auto& kv) {
    return kv.second.entry_id == entry_id && counts_toward_pressure(kv.second.state);
  });
}

std::int64_t Factory::pressure(const std::string& entry_id, const std::string& client_id) const {
  return std::count_if(glideins_.begin(), glideins_.end(), [&](const auto& kv) {
    return kv.second.entry_id == entry_id && kv.second.client_id == client_id &&
           counts_toward_pressure(kv.second.state);
  });
}

ActionSet Factory::cycle(SimTime now) {
  if (last_cycle_ && now < *last_cycle_ + config_.cycle_period)
    throw std::logic_error("factory cycle invoked before its period elapsed");
  last_cycle_ = now;

  ++status_seq_;
  ActionSet actions;
  for (const auto& [entry_id, entry] : entries_) {
    auto requests = mailbox_.fetch_requests(entry_id, now, config_.request_ttl);

    auto entry_pressure = pressure(entry_id);
    auto budget = entry.max_submit_per_cycle;
    for (const auto& req : requests) {
      if (!entry.trusts(req.client_id)) {
        ++auth_failures_;
        actions.auth_failures.push_back({entry_id, req.client_id, Reject::UntrustedClient});
        continue;
      }
      auto subject = authority_->verify(req.credential, entry.audience, Scope::ComputeCreate, now);
      if (!subject || *subject != req.client_id) {
        ++auth_failures_;
        actions.auth_failures.push_back(
            {entry_id, req.client_id, subject ? Reject::UntrustedClient : subject.error()});
        continue;
      }

      // The entry-wide limit is shared; clients are served in lexicographic order.
      const auto client_pressure = pressure(entry_id, req.client_id);
      const auto n = compute_submission(req.req_pressure, client_pressure,
                                        client_pressure + (entry.max_pressure - entry_pressure), budget);
      for (std::int64_t i = 0; i < n; ++i) {
        const GlideinId id{next_glidein_seq_++};
        GlideinRecord rec;
        rec.glidein_id = id;
        rec.entry_id = entry_id;
        rec.client_id = req.client_id;
        rec.submit_time = now;
        glideins_.emplace(id, std::move(rec));
        actions.submissions.push_back({id, entry_id, req.client_id, req.credential});
      }
      entry_pressure += n;
      budget -= n;

      std::vector<GlideinRecord> candidates;
      for (const auto& [id, g] : glideins_) {
        if (g.entry_id == entry_id && g.client_id == req.client_id && !g.retire_requested &&
            (g.state == GlideinState::Registered || g.state == GlideinState::Running))
          candidates.push_back(g);
      }
      for (auto id : compute_retirements(req.req_max_run, candidates)) {
        glideins_.at(id).retire_requested = true;
        actions.retirements.push_back(id);
      }
    }

    auto status = status_for(entry, now);
    mailbox_.publish_status(status);
    actions.statuses.push_back(std::move(status));
  }
  std::sort(actions.retirements.begin(), actions.retirements.end());
  return actions;
}

FactoryStatusMessage Factory::status_for(const EntryDescriptor& entry, SimTime now) const {
  FactoryStatusMessage status{entry.entry_id, status_seq_, {}, now};
  for (const auto& [id, g] : glideins_)
    if (g.entry_id == entry.entry_id) ++status.counts[g.client_id][g.state];
  return status;
}

const GlideinRecord& Factory::handle_glidein_event(GlideinId id, GlideinEvent event, SimTime,
                                                   std::optional<ResourceSpec> detected,
                                                   std::optional<std::uint64_t> jobs_served) {
  auto& rec = glideins_.at(id);
  rec.apply(event, detected);
  if (jobs_served) rec.jobs_served = *jobs_served;
  return rec;
}

}  // namespace glidemini
