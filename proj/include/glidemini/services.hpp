#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "glidemini/audit.hpp"
#include "glidemini/ce.hpp"
#include "glidemini/factory.hpp"
#include "glidemini/frontend.hpp"
#include "glidemini/message.hpp"
#include "glidemini/userpool.hpp"

namespace glidemini {

/// What a service may do besides answering requests. The simulation engine
/// and the process host each implement it; services never see which.
class Runtime {
 public:
  using ReplyHandler = std::function<void(const Message& reply)>;

  virtual ~Runtime() = default;
  virtual SimTime now() const = 0;
  /// Fills in sender, seq and signature, then delivers. `on_reply` gets the
  /// peer's response, or an ERROR(unreachable) if delivery failed.
  virtual void send(const std::string& address, Message msg, ReplyHandler on_reply = {}) = 0;
  virtual void schedule(SimTime at, std::function<void()> fn) = 0;
  /// Appends one line to this service's log.
  virtual void record(std::string kind, nlohmann::json payload) = 0;
  /// Uniform draw in [0, 1).
  virtual double uniform() = 0;

  void audit(const std::string& subject, AuditVerb verb, nlohmann::json detail = nlohmann::json::object());
};

class Service {
 public:
  Service(std::string name, std::string address, std::shared_ptr<Authority> authority);
  virtual ~Service() = default;

  const std::string& name() const { return name_; }
  const std::string& address() const { return address_; }

  virtual void start(Runtime& rt) = 0;

  /// Checks the envelope signature, answers PING, and passes everything
  /// else to handle(). Always returns a response (unsigned; the runtime
  /// signs it).
  Message dispatch(const Message& request, Runtime& rt);

 protected:
  virtual Message handle(const Message& request, Runtime& rt) = 0;
  /// Runs `tick` at `first` and then every `period` after each run, until it
  /// returns false.
  void every(Runtime& rt, SimTime first, Duration period, std::function<bool()> tick);
  void mirror_conflict(Runtime& rt, const std::string& what);

  std::string name_;
  std::string address_;
  std::shared_ptr<Authority> authority_;
};

/// The CE host: gateway, batch queue, and the glidein agents running on its
/// nodes.
class CeService : public Service {
 public:
  CeService(std::string address, CeConfig config, std::shared_ptr<Authority> authority, std::string pool_address);

  void start(Runtime& rt) override;

  const ComputeEntrypoint& ce() const { return ce_; }
  /// Agents created so far (one per node assignment), by glidein id.
  std::map<GlideinId, const GlideinAgent*> agents() const;

 protected:
  Message handle(const Message& request, Runtime& rt) override;

 private:
  struct Pilot {
    GlideinAgent agent;
    std::string factory;
    std::string node_id;
    bool announced = false;  // pool confirmed the registration
  };

  Message on_submit(const Message& m, Runtime& rt);
  Message on_claim(const Message& m, Runtime& rt);
  Message on_retire(const Message& m, Runtime& rt);
  void cycle(Runtime& rt);
  void startup(GlideinId id, Runtime& rt);
  void poll(GlideinId id, Runtime& rt);
  void finish_slot(GlideinId id, std::uint64_t slot_id, Runtime& rt);
  void send_job_done(nlohmann::json payload, int attempts_left, Runtime& rt);
  void send_registration(GlideinId id, Runtime& rt);
  void send_heartbeat(GlideinId id, Runtime& rt);
  void fail_pilot(GlideinId id, const std::string& reason, Runtime& rt);
  void notify(GlideinId id, MsgType type, Runtime& rt, nlohmann::json extra = nlohmann::json::object());

  ComputeEntrypoint ce_;
  std::string pool_address_;
  std::map<GlideinId, std::string> factory_of_;
  std::map<GlideinId, Pilot> pilots_;
};

/// The factory host: control loop plus the mailbox it serves.
class FactoryService : public Service {
 public:
  FactoryService(std::string address, FactoryConfig config, std::shared_ptr<Authority> authority);

  void start(Runtime& rt) override;
  const Factory& factory() const { return factory_; }

 protected:
  Message handle(const Message& request, Runtime& rt) override;

 private:
  void cycle(Runtime& rt);
  Message on_put(const Message& m, Runtime& rt);
  Message on_notification(const Message& m, Runtime& rt);
  void mark_failed(GlideinId id, const std::string& reason, Runtime& rt);

  Factory factory_;
};

/// The frontend host: provisioning client plus the user pool.
class FrontendService : public Service {
 public:
  FrontendService(std::string address, FrontendConfig config, PoolConfig pool, std::shared_ptr<Authority> authority,
                  std::string factory_address);

  void start(Runtime& rt) override;

  /// Access-point submission, shared by JOB_SUBMIT and in-process injection.
  Expected<JobId, Reject> submit_job(const JobSpec& spec, const Token& token, Runtime& rt);

  const UserPool& pool() const { return pool_; }
  const Frontend& frontend() const { return frontend_; }

 protected:
  Message handle(const Message& request, Runtime& rt) override;

 private:
  void frontend_tick(Runtime& rt);
  void provision(const std::vector<FactoryStatusMessage>& statuses, SimTime tick, Runtime& rt);
  void negotiate(Runtime& rt);
  void requeued(const std::vector<JobId>& jobs, const char* reason, Runtime& rt);
  void on_claim_reply(JobId job, GlideinId glidein, const Message& reply, Runtime& rt);
  Message on_job_done(const Message& m, Runtime& rt);

  Frontend frontend_;
  UserPool pool_;
  std::string factory_address_;
};

}  // namespace glidemini
