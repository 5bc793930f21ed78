#include "glidemini/state_machine.hpp"

namespace glidemini {

IllegalTransition::IllegalTransition(std::string state, std::string event)
    : std::logic_error("illegal transition: event '" + event + "' in state '" + state + "'"),
      state_(std::move(state)),
      event_(std::move(event)) {}

JobState transition(JobState s, JobEvent e) {
  using S = JobState;
  using E = JobEvent;
  switch (s) {
    case S::Idle:
      if (e == E::Matched) return S::Matched;
      if (e == E::Removed) return S::Removed;
      break;
    case S::Matched:
      if (e == E::Started) return S::Running;
      if (e == E::ClaimRefused) return S::Idle;
      break;
    case S::Running:
      if (e == E::Finished) return S::Completed;
      if (e == E::Crashed) return S::Failed;
      break;
    case S::Completed:
    case S::Failed:
    case S::Removed:
      break;
  }
  throw IllegalTransition(std::string(to_string(s)), std::string(to_string(e)));
}

GlideinState transition(GlideinState s, GlideinEvent e) {
  using S = GlideinState;
  using E = GlideinEvent;
  if (is_terminal(s)) throw IllegalTransition(std::string(to_string(s)), std::string(to_string(e)));
  if (e == E::Failed) return S::Failed;
  switch (s) {
    case S::Submitted:
      if (e == E::Queued) return S::Queued;
      break;
    case S::Queued:
      if (e == E::NodeAssigned) return S::Starting;
      break;
    case S::Starting:
      if (e == E::Registered) return S::Registered;
      break;
    case S::Registered:
      if (e == E::JobStarted) return S::Running;
      if (e == E::Retire) return S::Retiring;
      break;
    case S::Running:
      if (e == E::JobFinishedNoneActive) return S::Registered;
      if (e == E::Retire) return S::Retiring;
      break;
    case S::Retiring:
      if (e == E::Drained) return S::Done;
      break;
    default:
      break;
  }
  throw IllegalTransition(std::string(to_string(s)), std::string(to_string(e)));
}

bool is_terminal(JobState s) { return s == JobState::Completed || s == JobState::Failed || s == JobState::Removed; }

bool is_terminal(GlideinState s) { return s == GlideinState::Done || s == GlideinState::Failed; }

bool counts_toward_pressure(GlideinState s) {
  switch (s) {
    case GlideinState::Submitted:
    case GlideinState::Queued:
    case GlideinState::Starting:
    case GlideinState::Registered:
    case GlideinState::Running:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Idle: return "Idle";
    case JobState::Matched: return "Matched";
    case JobState::Running: return "Running";
    case JobState::Completed: return "Completed";
    case JobState::Failed: return "Failed";
    case JobState::Removed: return "Removed";
  }
  return "?";
}

std::string_view to_string(JobEvent e) {
  switch (e) {
    case JobEvent::Matched: return "matched";
    case JobEvent::ClaimRefused: return "claim_refused";
    case JobEvent::Started: return "started";
    case JobEvent::Finished: return "finished";
    case JobEvent::Crashed: return "crashed";
    case JobEvent::Removed: return "removed";
  }
  return "?";
}

std::string_view to_string(GlideinState s) {
  switch (s) {
    case GlideinState::Submitted: return "Submitted";
    case GlideinState::Queued: return "Queued";
    case GlideinState::Starting: return "Starting";
    case GlideinState::Registered: return "Registered";
    case GlideinState::Running: return "Running";
    case GlideinState::Retiring: return "Retiring";
    case GlideinState::Done: return "Done";
    case GlideinState::Failed: return "Failed";
  }
  return "?";
}

std::string_view to_string(GlideinEvent e) {
  switch (e) {
    case GlideinEvent::Queued: return "queued";
    case GlideinEvent::NodeAssigned: return "node_assigned";
    case GlideinEvent::Registered: return "registered";
    case GlideinEvent::JobStarted: return "job_started";
    case GlideinEvent::JobFinishedNoneActive: return "job_finished_and_none_idle_pending";
    case GlideinEvent::Retire: return "retire";
    case GlideinEvent::Drained: return "drained";
    case GlideinEvent::Failed: return "failed";
  }
  return "?";
}

std::optional<JobState> parse_job_state(std::string_view s) {
  for (auto v : kAllJobStates)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::optional<GlideinState> parse_glidein_state(std::string_view s) {
  for (auto v : kAllGlideinStates)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::optional<GlideinEvent> parse_glidein_event(std::string_view s) {
  for (auto v : kAllGlideinEvents)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

}  // namespace glidemini
