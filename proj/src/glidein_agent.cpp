#include "glidemini/glidein_agent.hpp"

#include <stdexcept>

namespace glidemini {

std::string_view to_string(RetireReason r) {
  switch (r) {
    case RetireReason::IdleTimeout: return "idle_timeout";
    case RetireReason::MaxLifetime: return "max_lifetime";
    case RetireReason::FactoryRequest: return "factory_request";
  }
  return "?";
}

GlideinAgent::GlideinAgent(GlideinId id, std::string client_id, std::string entry_id, GlideinPolicy policy)
    : id_(id), client_id_(std::move(client_id)), entry_id_(std::move(entry_id)), policy_(policy) {}

GlideinState GlideinAgent::startup(const ResourceSpec& node_advertised, bool fail, SimTime now) {
  if (state_ != GlideinState::Starting) throw std::logic_error("startup outside the Starting state");
  started_at_ = now;
  if (fail) {
    state_ = transition(state_, GlideinEvent::Failed);
    return state_;
  }
  detected_ = node_advertised;
  remaining_ = node_advertised;
  last_busy_time_ = now;
  registration_pending_ = true;
  state_ = transition(state_, GlideinEvent::Registered);
  return state_;
}

void GlideinAgent::registration_confirmed(SimTime) {
  registration_pending_ = false;
  registration_failures_ = 0;
}

GlideinState GlideinAgent::registration_failed(SimTime) {
  if (is_terminal(state_)) return state_;
  if (++registration_failures_ >= policy_.max_registration_failures) {
    state_ = transition(state_, GlideinEvent::Failed);
    registration_pending_ = false;
  }
  return state_;
}

Expected<std::uint64_t, Reject> GlideinAgent::claim(const ClaimRequest& req, SimTime now) {
  if (state_ == GlideinState::Retiring || is_terminal(state_)) return unexpected(Reject::Retiring);
  if (state_ != GlideinState::Registered && state_ != GlideinState::Running)
    return unexpected(Reject::UnknownGlidein);
  if (!fits(req.requirements, remaining_)) return unexpected(Reject::InsufficientResources);

  remaining_ = carve(remaining_, req.requirements);
  const auto slot_id = next_slot_id_++;
  slots_.emplace(slot_id, DynamicSlot{slot_id, req.job_id, req.requirements, now, now + req.runtime, req.fail});
  if (state_ == GlideinState::Registered) state_ = transition(state_, GlideinEvent::JobStarted);
  last_busy_time_ = now;
  return slot_id;
}

Expected<FinishedSlot, Reject> GlideinAgent::complete(std::uint64_t slot_id, SimTime now) {
  auto it = slots_.find(slot_id);
  if (it == slots_.end()) return unexpected(Reject::UnknownSlot);
  if (now < it->second.end_time) throw std::logic_error("slot completed before its end time");

  FinishedSlot out{it->second, false};
  remaining_ = release(remaining_, it->second.carved);
  slots_.erase(it);
  ++jobs_served_;
  last_busy_time_ = now;
  if (slots_.empty() && state_ == GlideinState::Running) {
    state_ = transition(state_, GlideinEvent::JobFinishedNoneActive);
    out.went_idle = true;
  }
  return out;
}

bool GlideinAgent::retire(RetireReason reason, SimTime) {
  if (state_ != GlideinState::Registered && state_ != GlideinState::Running) return false;
  state_ = transition(state_, GlideinEvent::Retire);
  retire_reason_ = reason;
  return true;
}

PollResult GlideinAgent::poll(SimTime now) {
  if (last_poll_ && now < *last_poll_ + policy_.poll_period)
    throw std::logic_error("glidein polled before its period elapsed");
  last_poll_ = now;

  PollResult r;
  if (is_terminal(state_) || state_ == GlideinState::Starting) return r;

  if (registration_pending_) r.resend_registration = true;

  if (state_ == GlideinState::Registered || state_ == GlideinState::Running) {
    if (started_at_ && now - *started_at_ > policy_.max_lifetime) {
      retire(RetireReason::MaxLifetime, now);
      r.began_retiring = RetireReason::MaxLifetime;
    } else if (slots_.empty() && now - last_busy_time_ > policy_.idle_timeout) {
      retire(RetireReason::IdleTimeout, now);
      r.began_retiring = RetireReason::IdleTimeout;
    }
  }
  // A drained pilot finishes in the same poll that notices it is empty.
  if (state_ == GlideinState::Retiring && slots_.empty()) {
    state_ = transition(state_, GlideinEvent::Drained);
    r.done = true;
    return r;
  }
  r.heartbeat = true;
  return r;
}

bool GlideinAgent::conserves_resources() const {
  auto total = remaining_;
  for (const auto& [id, slot] : slots_) total += slot.carved;
  return total == detected_;
}

}  // namespace glidemini
