#include "glidemini/simulation.hpp"

#include <sstream>

namespace glidemini {

/// The Runtime a service sees inside the simulation.
class Simulation::Port : public Runtime {
 public:
  Port(Simulation& sim, Service& service) : sim_(sim), service_(service) {}

  SimTime now() const override { return sim_.now_; }

  void send(const std::string& address, Message msg, ReplyHandler on_reply) override {
    msg.sender = service_.address();
    msg.seq = next_msg_seq_++;
    msg.sign(*sim_.authority_);
    sim_.deliver(service_.address(), address, std::move(msg), std::move(on_reply));
  }

  void schedule(SimTime at, std::function<void()> fn) override { sim_.push(at, std::move(fn)); }

  void record(std::string kind, nlohmann::json payload) override {
    sim_.log_.append(sim_.now_, service_.name(), std::move(kind), std::move(payload));
  }

  double uniform() override { return static_cast<double>(sim_.rng_() >> 11) * 0x1.0p-53; }

  Message seal(Message reply) {
    reply.sender = service_.address();
    reply.seq = next_msg_seq_++;
    reply.sign(*sim_.authority_);
    return reply;
  }

  Service& service() { return service_; }

 private:
  Simulation& sim_;
  Service& service_;
  std::uint64_t next_msg_seq_ = 0;
};

IssuedCredentials issue_credentials(Authority& authority, const TopologyConfig& t, SimTime now, Duration ttl) {
  const auto& client = t.frontend_config.client_id;
  const auto ce_audience =
      t.factory_config.entries.empty() ? t.ce.hostname : t.factory_config.entries.front().audience;
  return {authority.issue(client, ce_audience, Scope::ComputeCreate, ttl, now),
          authority.issue(client, t.factory.hostname, Scope::MailboxWrite, ttl, now),
          authority.issue("user", t.frontend.hostname, Scope::JobSubmit, ttl, now)};
}

Simulation::Simulation(const TopologyConfig& topology, WorkloadSpec workload, SimOptions options)
    : topology_(topology),
      workload_(std::move(workload)),
      options_(std::move(options)),
      authority_(std::make_shared<Authority>(Authority::from_seed(options_.seed))),
      rng_(options_.seed) {
  auto creds = issue_credentials(*authority_, topology_, now_, topology_.frontend_config.credential_ttl);
  user_token_ = creds.user;
  auto enabled = [&](const char* name) { return !options_.disabled.contains(name); };

  if (enabled("ce")) {
    ce_ = std::make_unique<CeService>(topology_.ce.address(), topology_.ce_config, authority_,
                                      topology_.frontend.address());
    ports_.push_back(std::make_unique<Port>(*this, *ce_));
  }
  if (enabled("factory")) {
    factory_ = std::make_unique<FactoryService>(topology_.factory.address(), topology_.factory_config, authority_);
    ports_.push_back(std::make_unique<Port>(*this, *factory_));
  }
  if (enabled("frontend")) {
    auto cfg = topology_.frontend_config;
    cfg.credential = creds.compute;
    cfg.mailbox_token = creds.mailbox;
    frontend_ = std::make_unique<FrontendService>(topology_.frontend.address(), std::move(cfg),
                                                  topology_.pool_config, authority_, topology_.factory.address());
    ports_.push_back(std::make_unique<Port>(*this, *frontend_));
  }
  for (auto& p : ports_) p->service().start(*p);
  inject_workload();
}

Simulation::~Simulation() = default;

void Simulation::push(SimTime at, std::function<void()> fn) {
  if (at < now_) at = now_;
  queue_.push(Event{at, next_seq_++, std::move(fn)});
}

Service* Simulation::service_at(const std::string& address) {
  for (auto& p : ports_)
    if (p->service().address() == address) return &p->service();
  return nullptr;
}

void Simulation::deliver(const std::string& from, const std::string& to, Message msg,
                         std::function<void(const Message&)> on_reply) {
  push(now_ + options_.latency, [this, from, to, msg = std::move(msg), on_reply = std::move(on_reply)]() mutable {
    Port* port = nullptr;
    for (auto& p : ports_)
      if (p->service().address() == to) port = p.get();
    if (!port) {
      if (on_reply) on_reply(error_message(Reject::Unreachable, to));
      return;
    }
    log_.append(now_, port->service().name(), "recv",
                {{"type", std::string(to_string(msg.type))}, {"from", from}, {"seq", msg.seq}});
    auto reply = port->seal(port->service().dispatch(msg, *port));
    if (on_reply)
      push(now_ + options_.latency, [reply = std::move(reply), on_reply = std::move(on_reply)] { on_reply(reply); });
  });
}

void Simulation::inject_workload() {
  for (const auto& item : workload_.items) {
    push(item.submit_time, [this, item] {
      for (std::int64_t i = 0; i < item.count; ++i) {
        ++injected_;
        if (!frontend_) continue;
        Port* port = nullptr;
        for (auto& p : ports_)
          if (&p->service() == frontend_.get()) port = p.get();
        frontend_->submit_job(JobSpec{"user", item.requirements, item.runtime, item.fail}, user_token_, *port);
      }
    });
  }
}

bool Simulation::drained() const {
  if (injected_ < workload_.total_jobs() || workload_.total_jobs() == 0 || !frontend_) return false;
  for (const auto& [id, job] : frontend_->pool().jobs())
    if (!is_terminal(job.state)) return false;
  if (factory_)
    for (const auto& [id, g] : factory_->factory().glideins())
      if (!is_terminal(g.state)) return false;
  return true;
}

void Simulation::run() {
  while (!queue_.empty()) {
    if (queue_.top().time > options_.until) {
      now_ = options_.until;
      return;
    }
    auto ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    ev.fn();
    ++events_;
    if (options_.observer) options_.observer(*this);
    if (options_.stop_when_drained && drained()) return;
  }
}

std::string check_audit_completeness(const Simulation& sim) {
  AuditReplay rp;
  try {
    rp = replay_audit(sim.log());
  } catch (const std::exception& e) {
    return std::string("audit replay failed: ") + e.what();
  }
  std::ostringstream out;
  const bool settled = sim.drained();
  auto same_glidein_state = [&](GlideinState a, GlideinState b) {
    if (a == b) return true;
    // Mid-run, a claim reply can still be in flight between agent and pool.
    auto active = [](GlideinState s) { return s == GlideinState::Registered || s == GlideinState::Running; };
    return !settled && active(a) && active(b);
  };

  if (sim.frontend()) {
    const auto& jobs = sim.frontend()->pool().jobs();
    if (jobs.size() != rp.jobs.size()) {
      out << "pool has " << jobs.size() << " jobs, audit has " << rp.jobs.size();
      return out.str();
    }
    for (const auto& [id, job] : jobs) {
      const auto& v = rp.jobs.at(id);
      if (v.state != job.state) {
        out << subject_of(id) << ": live " << to_string(job.state) << ", replayed " << to_string(v.state);
        return out.str();
      }
      if (v.executions.size() > 1) {
        out << subject_of(id) << " has " << v.executions.size() << " execution records";
        return out.str();
      }
    }
  }
  if (sim.factory()) {
    std::map<GlideinId, const GlideinAgent*> agents;
    if (sim.ce()) agents = sim.ce()->agents();
    for (const auto& [id, rec] : sim.factory()->factory().glideins()) {
      auto live = rec.state;
      if (auto a = agents.find(id); a != agents.end()) live = a->second->state();
      else if (sim.ce() && sim.ce()->ce().was_accepted(id)) live = GlideinState::Queued;
      auto it = rp.glideins.find(id);
      if (it == rp.glideins.end()) {
        out << subject_of(id) << " missing from the audit trail";
        return out.str();
      }
      if (!same_glidein_state(live, it->second.state)) {
        out << subject_of(id) << ": live " << to_string(live) << ", replayed " << to_string(it->second.state);
        return out.str();
      }
    }
    if (rp.glideins.size() != sim.factory()->factory().glideins().size()) {
      out << "audit trail has " << rp.glideins.size() << " glideins, factory "
          << sim.factory()->factory().glideins().size();
      return out.str();
    }
  }
  return {};
}

SimResult run_simulation(const TopologyConfig& topology, const WorkloadSpec& workload, const SimOptions& options) {
  Simulation sim(topology, workload, options);
  sim.run();
  SimResult r;
  r.drained = sim.drained();
  r.end_time = sim.now();
  r.audit_mismatch = check_audit_completeness(sim);
  r.metrics = metrics_report(sim.log());
  if (sim.frontend()) r.jobs = sim.frontend()->pool().job_list();
  r.log = sim.log();
  return r;
}

}  // namespace glidemini
