#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace glidemini {

enum class JobState { Idle, Matched, Running, Completed, Failed, Removed };

enum class JobEvent {
  Matched,       // negotiator picked a slot
  ClaimRefused,  // the glidein refused the claim, or its ad expired first
  Started,
  Finished,
  Crashed,
  Removed,
};

enum class GlideinState { Submitted, Queued, Starting, Registered, Running, Retiring, Done, Failed };

enum class GlideinEvent {
  Queued,
  NodeAssigned,
  Registered,
  JobStarted,
  JobFinishedNoneActive,  // last running slot released
  Retire,
  Drained,
  Failed,
};

class IllegalTransition : public std::logic_error {
 public:
  IllegalTransition(std::string state, std::string event);
  const std::string& state() const { return state_; }
  const std::string& event() const { return event_; }

 private:
  std::string state_;
  std::string event_;
};

/// Successor state for a legal (state, event) pair; throws IllegalTransition otherwise.
JobState transition(JobState s, JobEvent e);
GlideinState transition(GlideinState s, GlideinEvent e);

bool is_terminal(JobState s);
bool is_terminal(GlideinState s);

/// Glidein states that count as "queued or running" pressure at an entry.
bool counts_toward_pressure(GlideinState s);

std::string_view to_string(JobState s);
std::string_view to_string(JobEvent e);
std::string_view to_string(GlideinState s);
std::string_view to_string(GlideinEvent e);

std::optional<JobState> parse_job_state(std::string_view s);
std::optional<GlideinState> parse_glidein_state(std::string_view s);
std::optional<GlideinEvent> parse_glidein_event(std::string_view s);

inline constexpr GlideinState kAllGlideinStates[] = {
    GlideinState::Submitted, GlideinState::Queued,   GlideinState::Starting, GlideinState::Registered,
    GlideinState::Running,   GlideinState::Retiring, GlideinState::Done,     GlideinState::Failed};
inline constexpr GlideinEvent kAllGlideinEvents[] = {
    GlideinEvent::Queued, GlideinEvent::NodeAssigned, GlideinEvent::Registered, GlideinEvent::JobStarted,
    GlideinEvent::JobFinishedNoneActive, GlideinEvent::Retire, GlideinEvent::Drained, GlideinEvent::Failed};
inline constexpr JobState kAllJobStates[] = {JobState::Idle,      JobState::Matched, JobState::Running,
                                             JobState::Completed, JobState::Failed,  JobState::Removed};
inline constexpr JobEvent kAllJobEvents[] = {JobEvent::Matched,  JobEvent::ClaimRefused, JobEvent::Started,
                                             JobEvent::Finished, JobEvent::Crashed,      JobEvent::Removed};

}  // namespace glidemini
