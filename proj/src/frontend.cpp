#include "glidemini/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace glidemini {

std::int64_t Rational::ceil_mul(std::int64_t n) const {
  if (n <= 0) return 0;
  const auto p = n * num;
  return (p + den - 1) / den;
}

Rational Rational::parse(const nlohmann::json& j) {
  Rational r;
  if (j.is_number_integer()) {
    r = {j.get<std::int64_t>(), 1};
  } else if (j.is_number()) {
    r = {static_cast<std::int64_t>(std::llround(j.get<double>() * 1000.0)), 1000};
  } else if (j.is_string()) {
    const auto s = j.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) {
        r = {std::stoll(s), 1};
      } else {
        r = {std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1))};
      }
    } catch (const std::exception&) {
      throw std::invalid_argument("bad rational '" + s + "'");
    }
  } else {
    throw std::invalid_argument("expansion factor must be a number or \"p/q\" string");
  }
  if (r.num <= 0 || r.den <= 0) throw std::invalid_argument("expansion factor must be positive");
  return r;
}

std::string Rational::str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }

void FrontendConfig::validate() const {
  if (client_id.empty()) throw std::invalid_argument("frontend client_id must not be empty");
  if (max_pressure_per_entry < 0) throw std::invalid_argument("max_pressure_per_entry must be non-negative");
  if (total_curb_glideins > total_max_glideins)
    throw std::invalid_argument("total_curb_glideins must not exceed total_max_glideins");
  if (expansion_factor.num <= 0 || expansion_factor.den <= 0)
    throw std::invalid_argument("expansion factor must be positive");
  if (cycle_period <= Duration::zero()) throw std::invalid_argument("frontend cycle period must be positive");
}

MatchCounts count_matching(std::span<const Job> jobs, const ResourceSpec& node_advertised) {
  MatchCounts c;
  for (const auto& j : jobs) {
    if (!fits(j.requirements, node_advertised)) continue;
    if (j.state == JobState::Idle) ++c.idle;
    else if (j.state == JobState::Running) ++c.running;
  }
  return c;
}

ProvisioningRequest compute_request(std::int64_t matching_idle, std::int64_t busy_glideins,
                                    std::int64_t total_glideins, const FrontendConfig& config) {
  const auto base = config.expansion_factor.ceil_mul(matching_idle) + busy_glideins;
  auto pressure = std::min(base, config.max_pressure_per_entry);
  if (total_glideins >= config.total_max_glideins) {
    pressure = 0;
  } else if (total_glideins >= config.total_curb_glideins) {
    pressure = std::min(pressure, busy_glideins);
  }
  return {pressure, pressure};
}

Frontend::Frontend(FrontendConfig config, std::shared_ptr<Authority> authority)
    : config_(std::move(config)), authority_(std::move(authority)) {
  config_.validate();
  if (!authority_) throw std::invalid_argument("frontend needs an authority");
  std::sort(config_.entries.begin(), config_.entries.end(),
            [](const FrontendEntry& a, const FrontendEntry& b) { return a.entry_id < b.entry_id; });
}

std::vector<PlannedRequest> Frontend::cycle(const FrontendInputs& inputs, SimTime now) {
  if (last_cycle_ && now < *last_cycle_ + config_.cycle_period)
    throw std::logic_error("frontend cycle invoked before its period elapsed");
  last_cycle_ = now;

  auto refresh_if_due = [&](Token& t) {
    const auto lifetime = t.expires_at - t.issued_at;
    if (now >= t.expires_at - lifetime / 4) {
      if (auto fresh = authority_->refresh(t, config_.credential_ttl, now)) t = std::move(fresh).value();
    }
  };
  refresh_if_due(config_.credential);
  refresh_if_due(config_.mailbox_token);

  std::int64_t total = 0;
  for (const auto& status : inputs.statuses) {
    if (auto it = status.counts.find(config_.client_id); it != status.counts.end())
      for (const auto& [state, n] : it->second)
        if (counts_toward_pressure(state)) total += n;
  }

  std::vector<PlannedRequest> out;
  for (const auto& entry : config_.entries) {
    const auto matching = count_matching(inputs.jobs, entry.node_advertised);
    std::int64_t busy = 0;
    if (auto it = inputs.busy_glideins.find(entry.entry_id); it != inputs.busy_glideins.end()) busy = it->second;
    const auto req = compute_request(matching.idle, busy, total, config_);

    RequestMessage msg;
    msg.client_id = config_.client_id;
    msg.entry_id = entry.entry_id;
    msg.seq = acked_seq_.contains(entry.entry_id) ? acked_seq_[entry.entry_id] + 1 : 0;
    msg.req_pressure = req.req_pressure;
    msg.req_max_run = req.req_max_run;
    msg.credential = config_.credential;
    msg.sent_at = now;
    msg.sign(*authority_);
    out.push_back({entry.mailbox_address, std::move(msg), matching.idle});
  }
  return out;
}

void Frontend::on_put_accepted(const std::string& entry_id, std::uint64_t seq) {
  auto& s = acked_seq_[entry_id];
  s = std::max(s, seq);
}

void Frontend::on_put_stale(const std::string& entry_id, std::optional<std::uint64_t> stored_seq) {
  if (stored_seq) on_put_accepted(entry_id, *stored_seq);
}

std::optional<std::uint64_t> Frontend::last_seq(const std::string& entry_id) const {
  if (auto it = acked_seq_.find(entry_id); it != acked_seq_.end()) return it->second;
  return std::nullopt;
}

}  // namespace glidemini
