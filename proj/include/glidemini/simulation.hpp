#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "glidemini/event_log.hpp"
#include "glidemini/metrics.hpp"
#include "glidemini/services.hpp"
#include "glidemini/topology.hpp"

namespace glidemini {

class Simulation;

struct SimOptions {
  std::uint64_t seed = 42;
  SimTime until = at_s(7200);
  /// Stop once the workload is in, every job is terminal, and every glidein
  /// the factory knows about is terminal.
  bool stop_when_drained = true;
  /// Services left out of the run; messages to them are undeliverable.
  std::set<std::string> disabled;
  Duration latency = ms(10);
  /// Called after every event.
  std::function<void(const Simulation&)> observer;
};

/// All services in one deterministic scheduler. Events run in (time,
/// insertion order); every message takes `latency` to arrive, and so does
/// its response.
class Simulation {
 public:
  Simulation(const TopologyConfig& topology, WorkloadSpec workload, SimOptions options = {});
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  /// Runs until the queue empties, `until`, or (if enabled) drain.
  void run();

  SimTime now() const { return now_; }
  bool drained() const;
  const EventLog& log() const { return log_; }
  std::uint64_t events_processed() const { return events_; }

  const CeService* ce() const { return ce_.get(); }
  const FactoryService* factory() const { return factory_.get(); }
  const FrontendService* frontend() const { return frontend_.get(); }
  const Authority& authority() const { return *authority_; }

 private:
  class Port;
  friend class Port;

  struct Event {
    SimTime time;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void push(SimTime at, std::function<void()> fn);
  void deliver(const std::string& from, const std::string& to, Message msg, std::function<void(const Message&)> on_reply);
  Service* service_at(const std::string& address);
  void inject_workload();

  TopologyConfig topology_;
  WorkloadSpec workload_;
  SimOptions options_;
  std::shared_ptr<Authority> authority_;
  std::mt19937_64 rng_;
  SimTime now_{};
  std::uint64_t next_seq_ = 0;
  std::uint64_t events_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  EventLog log_;
  Token user_token_;
  std::int64_t injected_ = 0;

  std::unique_ptr<CeService> ce_;
  std::unique_ptr<FactoryService> factory_;
  std::unique_ptr<FrontendService> frontend_;
  std::vector<std::unique_ptr<Port>> ports_;
};

struct SimResult {
  EventLog log;
  MetricsReport metrics;
  bool drained = false;
  SimTime end_time{};
  std::vector<Job> jobs;
  /// Empty when replaying the audit trail reproduces every final state.
  std::string audit_mismatch;
};

SimResult run_simulation(const TopologyConfig& topology, const WorkloadSpec& workload, const SimOptions& options = {});

/// Compares the audit replay of `sim`'s log with the live service state.
/// Returns a description of the first difference, or an empty string.
std::string check_audit_completeness(const Simulation& sim);

/// Credentials the launcher hands to services and users.
struct IssuedCredentials {
  Token compute;  // frontend -> CE, compute.create
  Token mailbox;  // frontend -> factory mailbox, mailbox.write
  Token user;     // users -> pool, job.submit
};
IssuedCredentials issue_credentials(Authority& authority, const TopologyConfig& topology, SimTime now,
                                    Duration ttl = secs(24 * 3600));

}  // namespace glidemini
