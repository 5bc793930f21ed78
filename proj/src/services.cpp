#include "glidemini/services.hpp"

#include <stdexcept>

namespace glidemini {
namespace {

std::optional<Token> token_field(const nlohmann::json& payload) {
  if (!payload.contains("token") || !payload["token"].is_string()) return std::nullopt;
  return Token::from_wire(payload["token"].get<std::string>());
}

GlideinId glidein_field(const nlohmann::json& p) { return GlideinId{p.at("glidein_id").get<std::uint64_t>()}; }
JobId job_field(const nlohmann::json& p) { return JobId{p.at("job_id").get<std::uint64_t>()}; }

Message reject_reply(MsgType type, Reject reason, nlohmann::json extra = nlohmann::json::object()) {
  extra["accepted"] = false;
  extra["reason"] = std::string(to_string(reason));
  return Message::make(type, std::move(extra));
}

}  // namespace

void Runtime::audit(const std::string& subject, AuditVerb verb, nlohmann::json detail) {
  record(std::string(kAuditKind),
         AuditRecord{now(), {}, subject, verb, std::move(detail)}.payload());
}

// ---------------------------------------------------------------- Service

Service::Service(std::string name, std::string address, std::shared_ptr<Authority> authority)
    : name_(std::move(name)), address_(std::move(address)), authority_(std::move(authority)) {
  if (!authority_) throw std::invalid_argument(name_ + " needs an authority");
}

Message Service::dispatch(const Message& request, Runtime& rt) {
  if (!request.verify(*authority_)) {
    rt.audit(request.sender.empty() ? std::string("peer") : "peer." + request.sender, AuditVerb::RejectedAuth,
             {{"reason", "bad-signature"}, {"where", name_}, {"type", std::string(to_string(request.type))}});
    return error_message(Reject::BadSignature);
  }
  if (request.type == MsgType::Ping) return Message::make(MsgType::Pong, {{"service", name_}});
  try {
    return handle(request, rt);
  } catch (const nlohmann::json::exception& e) {
    rt.record("malformed", {{"type", std::string(to_string(request.type))}, {"error", e.what()}});
    return error_message(Reject::Malformed, e.what());
  }
}

void Service::every(Runtime& rt, SimTime first, Duration period, std::function<bool()> tick) {
  auto loop = std::make_shared<std::function<void()>>();
  *loop = [&rt, period, tick = std::move(tick), weak = std::weak_ptr<std::function<void()>>(loop)]() {
    if (!tick()) return;
    if (auto self = weak.lock()) rt.schedule(rt.now() + period, [self] { (*self)(); });
  };
  rt.schedule(first, [loop] { (*loop)(); });
}

void Service::mirror_conflict(Runtime& rt, const std::string& what) {
  rt.record("mirror_conflict", {{"detail", what}});
}

// ---------------------------------------------------------------- CE

CeService::CeService(std::string address, CeConfig config, std::shared_ptr<Authority> authority,
                     std::string pool_address)
    : Service("ce", std::move(address), authority),
      ce_(std::move(config), std::move(authority)),
      pool_address_(std::move(pool_address)) {}

std::map<GlideinId, const GlideinAgent*> CeService::agents() const {
  std::map<GlideinId, const GlideinAgent*> out;
  for (const auto& [id, p] : pilots_) out.emplace(id, &p.agent);
  return out;
}

void CeService::start(Runtime& rt) {
  every(rt, rt.now(), ce_.config().cycle_period, [this, &rt] {
    cycle(rt);
    return true;
  });
}

Message CeService::handle(const Message& m, Runtime& rt) {
  switch (m.type) {
    case MsgType::GlideinSubmit: return on_submit(m, rt);
    case MsgType::Claim: return on_claim(m, rt);
    case MsgType::GlideinRetire: return on_retire(m, rt);
    default: return error_message(Reject::Malformed, "ce does not take " + std::string(to_string(m.type)));
  }
}

void CeService::notify(GlideinId id, MsgType type, Runtime& rt, nlohmann::json extra) {
  auto it = factory_of_.find(id);
  if (it == factory_of_.end()) return;
  extra["glidein_id"] = id.value;
  rt.send(it->second, Message::make(type, std::move(extra)));
}

Message CeService::on_submit(const Message& m, Runtime& rt) {
  const auto& p = m.payload;
  const auto id = glidein_field(p);
  GlideinSubmission sub{id, p.at("client_id").get<std::string>(), p.at("entry_id").get<std::string>(), {}};
  auto token = token_field(p);
  Expected<void, Reject> result = unexpected(Reject::BadSignature);
  if (token) {
    sub.token = *token;
    result = ce_.submit_glidein(sub, rt.now());
  }
  if (!result) {
    if (is_auth_reject(result.error()))
      rt.audit(subject_of(id), AuditVerb::RejectedAuth,
               {{"reason", std::string(to_string(result.error()))}, {"where", "ce"}, {"client", sub.client_id}});
    return reject_reply(MsgType::GlideinSubmitAck, result.error(), {{"glidein_id", id.value}});
  }
  factory_of_[id] = m.sender;
  rt.audit(subject_of(id), AuditVerb::Queued, {{"client", sub.client_id}, {"entry", sub.entry_id}});
  notify(id, MsgType::Queue, rt);
  return Message::make(MsgType::GlideinSubmitAck, {{"accepted", true}, {"glidein_id", id.value}});
}

void CeService::cycle(Runtime& rt) {
  for (auto& a : ce_.cycle(rt.now())) {
    const auto id = a.glidein.glidein_id;
    pilots_.emplace(std::piecewise_construct, std::forward_as_tuple(id),
                    std::forward_as_tuple(Pilot{GlideinAgent(id, a.glidein.client_id, a.glidein.entry_id,
                                                             ce_.config().glidein),
                                                factory_of_[id], a.node_id}));
    rt.audit(subject_of(id), AuditVerb::Assigned, {{"node", a.node_id}, {"start_at", to_ms(a.start_at)}});
    notify(id, MsgType::Start, rt, {{"node", a.node_id}});
    rt.schedule(a.start_at, [this, id, &rt] { startup(id, rt); });
  }
}

void CeService::startup(GlideinId id, Runtime& rt) {
  auto& pilot = pilots_.at(id);
  const auto* node = ce_.node_of(id);
  if (!node) throw std::logic_error("starting glidein holds no node");
  // Drawn unconditionally so the random stream does not depend on the
  // configured probability.
  const bool fail = rt.uniform() < ce_.config().validation_failure_prob;
  if (pilot.agent.startup(node->advertised, fail, rt.now()) == GlideinState::Failed) {
    fail_pilot(id, "validation", rt);
    return;
  }
  rt.audit(subject_of(id), AuditVerb::Validated, {{"detected", pilot.agent.detected()}});
  send_registration(id, rt);
  every(rt, rt.now() + pilot.agent.policy().poll_period, pilot.agent.policy().poll_period, [this, id, &rt] {
    poll(id, rt);
    return !is_terminal(pilots_.at(id).agent.state());
  });
}

void CeService::send_registration(GlideinId id, Runtime& rt) {
  const auto& a = pilots_.at(id).agent;
  nlohmann::json p{{"glidein_id", id.value},   {"client_id", a.client_id()}, {"entry_id", a.entry_id()},
                   {"address", address()},     {"detected", a.detected()},   {"remaining", a.remaining()},
                   {"retiring", a.state() == GlideinState::Retiring}};
  rt.send(pool_address_, Message::make(MsgType::EpRegister, std::move(p)), [this, id, &rt](const Message& reply) {
    auto& pilot = pilots_.at(id);
    if (is_terminal(pilot.agent.state())) return;
    if (reply.type == MsgType::Ack) {
      pilot.agent.registration_confirmed(rt.now());
      if (!pilot.announced) {
        pilot.announced = true;
        rt.audit(subject_of(id), AuditVerb::Registered, {{"detected", pilot.agent.detected()}});
        notify(id, MsgType::Registered, rt, {{"detected", pilot.agent.detected()}});
      }
      return;
    }
    if (pilot.agent.registration_failed(rt.now()) == GlideinState::Failed) fail_pilot(id, "registration", rt);
  });
}

void CeService::send_heartbeat(GlideinId id, Runtime& rt) {
  const auto& a = pilots_.at(id).agent;
  nlohmann::json p{{"glidein_id", id.value},
                   {"remaining", a.remaining()},
                   {"retiring", a.state() == GlideinState::Retiring}};
  rt.send(pool_address_, Message::make(MsgType::EpHeartbeat, std::move(p)), [this, id, &rt](const Message& reply) {
    const auto& a = pilots_.at(id).agent;
    if (is_terminal(a.state())) return;
    // The pool forgot us (ad expired): advertise again.
    if (reply.type == MsgType::Error && reason_of(reply) == Reject::UnknownGlidein) send_registration(id, rt);
  });
}

void CeService::fail_pilot(GlideinId id, const std::string& reason, Runtime& rt) {
  rt.audit(subject_of(id), AuditVerb::Failed, {{"reason", reason}});
  ce_.release_node(id, rt.now());
  notify(id, MsgType::Fail, rt, {{"reason", reason}});
}

void CeService::poll(GlideinId id, Runtime& rt) {
  auto& pilot = pilots_.at(id);
  auto& a = pilot.agent;
  const auto r = a.poll(rt.now());
  if (r.began_retiring) {
    rt.audit(subject_of(id), AuditVerb::Retiring, {{"reason", std::string(to_string(*r.began_retiring))}});
    notify(id, MsgType::Retiring, rt, {{"reason", std::string(to_string(*r.began_retiring))}});
  }
  if (r.done) {
    rt.audit(subject_of(id), AuditVerb::Done, {{"jobs_served", a.jobs_served()}});
    rt.send(pool_address_, Message::make(MsgType::EpDeregister, {{"glidein_id", id.value}}));
    ce_.release_node(id, rt.now());
    notify(id, MsgType::Done, rt, {{"jobs_served", a.jobs_served()}});
    return;
  }
  if (r.resend_registration) {
    send_registration(id, rt);
  } else if (r.heartbeat) {
    send_heartbeat(id, rt);
  }
}

Message CeService::on_claim(const Message& m, Runtime& rt) {
  const auto& p = m.payload;
  const auto id = glidein_field(p);
  ClaimRequest req{job_field(p), p.at("requirements").get<ResourceSpec>(), ms(p.at("runtime_ms").get<std::int64_t>()),
                   p.value("fail", false)};
  auto it = pilots_.find(id);
  if (it == pilots_.end()) return reject_reply(MsgType::ClaimReply, Reject::UnknownGlidein);
  auto& a = it->second.agent;
  const auto before = a.state();
  auto slot = a.claim(req, rt.now());
  if (!slot) return reject_reply(MsgType::ClaimReply, slot.error(), {{"remaining", a.remaining()}});

  const auto& s = a.slots().at(*slot);
  rt.schedule(s.end_time, [this, id, slot_id = *slot, &rt] { finish_slot(id, slot_id, rt); });
  if (before == GlideinState::Registered && a.state() == GlideinState::Running) notify(id, MsgType::Running, rt);
  return Message::make(MsgType::ClaimReply, {{"accepted", true},
                                             {"job_id", req.job_id.value},
                                             {"glidein_id", id.value},
                                             {"slot_id", *slot},
                                             {"start", to_ms(s.start_time)},
                                             {"remaining", a.remaining()}});
}

void CeService::finish_slot(GlideinId id, std::uint64_t slot_id, Runtime& rt) {
  auto& a = pilots_.at(id).agent;
  auto done = a.complete(slot_id, rt.now());
  if (!done) throw std::logic_error("completion for a slot that no longer exists");
  const auto& s = done->slot;
  send_job_done({{"job_id", s.job_id.value},
                 {"glidein_id", id.value},
                 {"slot_id", s.slot_id},
                 {"start", to_ms(s.start_time)},
                 {"end", to_ms(s.end_time)},
                 {"failed", s.fail},
                 {"remaining", a.remaining()}},
                10, rt);
  if (done->went_idle) notify(id, MsgType::Idle, rt);
}

void CeService::send_job_done(nlohmann::json payload, int attempts_left, Runtime& rt) {
  rt.send(pool_address_, Message::make(MsgType::EpJobDone, payload),
          [this, payload, attempts_left, &rt](const Message& reply) {
            if (reply.type == MsgType::Error && reason_of(reply) == Reject::Unreachable && attempts_left > 1)
              rt.schedule(rt.now() + secs(1), [this, payload, attempts_left, &rt] {
                send_job_done(payload, attempts_left - 1, rt);
              });
          });
}

Message CeService::on_retire(const Message& m, Runtime& rt) {
  const auto id = glidein_field(m.payload);
  auto it = pilots_.find(id);
  if (it == pilots_.end()) return error_message(Reject::UnknownGlidein);
  if (it->second.agent.retire(RetireReason::FactoryRequest, rt.now())) {
    const auto reason = std::string(to_string(RetireReason::FactoryRequest));
    rt.audit(subject_of(id), AuditVerb::Retiring, {{"reason", reason}});
    notify(id, MsgType::Retiring, rt, {{"reason", reason}});
    send_heartbeat(id, rt);
  }
  return Message::make(MsgType::Ack);
}

// ---------------------------------------------------------------- factory

FactoryService::FactoryService(std::string address, FactoryConfig config, std::shared_ptr<Authority> authority)
    : Service("factory", std::move(address), authority), factory_(std::move(config), std::move(authority)) {}

void FactoryService::start(Runtime& rt) {
  every(rt, rt.now(), factory_.config().cycle_period, [this, &rt] {
    cycle(rt);
    return true;
  });
}

Message FactoryService::handle(const Message& m, Runtime& rt) {
  switch (m.type) {
    case MsgType::RequestPut: return on_put(m, rt);
    case MsgType::StatusGet: {
      nlohmann::json statuses = nlohmann::json::array();
      for (const auto& s : factory_.mailbox().fetch_status(m.payload.value("client_id", std::string())))
        statuses.push_back(s);
      return Message::make(MsgType::StatusReply, {{"statuses", statuses}});
    }
    case MsgType::Queue:
    case MsgType::Start:
    case MsgType::Registered:
    case MsgType::Running:
    case MsgType::Idle:
    case MsgType::Retiring:
    case MsgType::Done:
    case MsgType::Fail: return on_notification(m, rt);
    default: return error_message(Reject::Malformed, "factory does not take " + std::string(to_string(m.type)));
  }
}

void FactoryService::cycle(Runtime& rt) {
  const auto now = rt.now();
  auto actions = factory_.cycle(now);

  for (const auto& f : actions.auth_failures)
    rt.audit("client." + f.client_id, AuditVerb::RejectedAuth,
             {{"reason", std::string(to_string(f.reason))}, {"where", "factory"}, {"entry", f.entry_id}});

  nlohmann::json submitted = nlohmann::json::array();
  for (const auto& s : actions.submissions) {
    submitted.push_back(s.glidein_id.value);
    rt.audit(subject_of(s.glidein_id), AuditVerb::Submitted, {{"client", s.client_id}, {"entry", s.entry_id}});
    const auto& entry = factory_.entries().at(s.entry_id);
    nlohmann::json p{{"glidein_id", s.glidein_id.value},
                     {"client_id", s.client_id},
                     {"entry_id", s.entry_id},
                     {"token", s.credential.wire()}};
    const auto id = s.glidein_id;
    rt.send(entry.ce_address, Message::make(MsgType::GlideinSubmit, std::move(p)), [this, id, &rt](const Message& r) {
      if (r.type == MsgType::GlideinSubmitAck && r.payload.value("accepted", false)) return;
      const auto reason = reason_of(r);
      mark_failed(id, reason ? std::string(to_string(*reason)) : "submit-failed", rt);
    });
  }
  nlohmann::json retired = nlohmann::json::array();
  for (auto id : actions.retirements) {
    retired.push_back(id.value);
    const auto& entry = factory_.entries().at(factory_.glideins().at(id).entry_id);
    rt.send(entry.ce_address, Message::make(MsgType::GlideinRetire, {{"glidein_id", id.value}}));
  }

  nlohmann::json entries = nlohmann::json::object();
  for (const auto& st : actions.statuses)
    entries[st.entry_id] = {{"pressure", factory_.pressure(st.entry_id)}, {"status", st}};
  rt.record("factory_cycle", {{"entries", entries}, {"submitted", submitted}, {"retire", retired}});
}

void FactoryService::mark_failed(GlideinId id, const std::string& reason, Runtime& rt) {
  const auto& g = factory_.glideins().at(id);
  if (is_terminal(g.state)) return;
  try {
    factory_.handle_glidein_event(id, GlideinEvent::Failed, rt.now());
  } catch (const IllegalTransition& e) {
    mirror_conflict(rt, e.what());
    return;
  }
  rt.audit(subject_of(id), AuditVerb::Failed, {{"reason", reason}});
}

Message FactoryService::on_put(const Message& m, Runtime& rt) {
  const auto& p = m.payload;
  auto msg = p.at("request").get<RequestMessage>();
  auto token = token_field(p);
  auto stored = [&]() -> nlohmann::json {
    auto s = factory_.mailbox().last_seq(msg.client_id, msg.entry_id);
    return s ? nlohmann::json(*s) : nlohmann::json(nullptr);
  };
  Expected<PutAck, Reject> r = unexpected(Reject::BadSignature);
  if (token) r = factory_.mailbox().put_request(*authority_, msg, *token, rt.now());
  if (!r) {
    if (is_auth_reject(r.error()) || r.error() == Reject::UntrustedClient)
      rt.audit("client." + msg.client_id, AuditVerb::RejectedAuth,
               {{"reason", std::string(to_string(r.error()))}, {"where", "mailbox"}, {"entry", msg.entry_id}});
    return reject_reply(MsgType::RequestAck, r.error(), {{"entry_id", msg.entry_id}, {"stored_seq", stored()}});
  }
  return Message::make(MsgType::RequestAck,
                       {{"accepted", true}, {"entry_id", msg.entry_id}, {"stored_seq", r->stored_seq}});
}

Message FactoryService::on_notification(const Message& m, Runtime& rt) {
  const auto id = glidein_field(m.payload);
  std::optional<ResourceSpec> detected;
  std::optional<std::uint64_t> jobs_served;
  GlideinEvent e{};
  switch (m.type) {
    case MsgType::Queue: e = GlideinEvent::Queued; break;
    case MsgType::Start: e = GlideinEvent::NodeAssigned; break;
    case MsgType::Registered:
      e = GlideinEvent::Registered;
      detected = m.payload.at("detected").get<ResourceSpec>();
      break;
    case MsgType::Running: e = GlideinEvent::JobStarted; break;
    case MsgType::Idle: e = GlideinEvent::JobFinishedNoneActive; break;
    case MsgType::Retiring: e = GlideinEvent::Retire; break;
    case MsgType::Done:
      e = GlideinEvent::Drained;
      jobs_served = m.payload.value("jobs_served", std::uint64_t{0});
      break;
    default: e = GlideinEvent::Failed; break;
  }
  if (!factory_.glideins().contains(id)) return error_message(Reject::UnknownGlidein);
  try {
    factory_.handle_glidein_event(id, e, rt.now(), detected, jobs_served);
  } catch (const IllegalTransition& ex) {
    mirror_conflict(rt, subject_of(id) + ": " + ex.what());
  }
  return Message::make(MsgType::Ack);
}

// ---------------------------------------------------------------- frontend + pool

FrontendService::FrontendService(std::string address, FrontendConfig config, PoolConfig pool,
                                 std::shared_ptr<Authority> authority, std::string factory_address)
    : Service("frontend", std::move(address), authority),
      frontend_(std::move(config), authority),
      pool_(std::move(pool), authority),
      factory_address_(std::move(factory_address)) {}

void FrontendService::start(Runtime& rt) {
  every(rt, rt.now(), frontend_.config().cycle_period, [this, &rt] {
    frontend_tick(rt);
    return true;
  });
  every(rt, rt.now(), pool_.config().negotiation_period, [this, &rt] {
    negotiate(rt);
    return true;
  });
}

Expected<JobId, Reject> FrontendService::submit_job(const JobSpec& spec, const Token& token, Runtime& rt) {
  auto id = pool_.submit_job(spec, token, rt.now());
  if (!id) {
    if (is_auth_reject(id.error()))
      rt.audit("user." + token.subject, AuditVerb::RejectedAuth,
               {{"reason", std::string(to_string(id.error()))}, {"where", "pool"}});
    return id;
  }
  const auto& job = pool_.jobs().at(*id);
  rt.audit(subject_of(*id), AuditVerb::Submitted,
           {{"owner", job.owner}, {"requirements", job.requirements}, {"runtime_ms", to_ms(job.declared_runtime)}});
  return id;
}

void FrontendService::frontend_tick(Runtime& rt) {
  const auto tick = rt.now();
  rt.send(factory_address_, Message::make(MsgType::StatusGet, {{"client_id", frontend_.config().client_id}}),
          [this, tick, &rt](const Message& reply) {
            if (reply.type != MsgType::StatusReply) {
              rt.record("frontend_skip", {{"reason", reason_of(reply) ? std::string(to_string(*reason_of(reply)))
                                                                       : std::string(to_string(reply.type))}});
              return;
            }
            std::vector<FactoryStatusMessage> statuses;
            for (const auto& s : reply.payload.at("statuses")) statuses.push_back(s.get<FactoryStatusMessage>());
            provision(statuses, tick, rt);
          });
}

void FrontendService::provision(const std::vector<FactoryStatusMessage>& statuses, SimTime tick, Runtime& rt) {
  const auto jobs = pool_.job_list();
  FrontendInputs in{jobs, pool_.busy_glideins(frontend_.config().client_id), statuses};
  nlohmann::json logged = nlohmann::json::array();
  for (auto& planned : frontend_.cycle(in, tick)) {
    const auto& msg = planned.message;
    logged.push_back({{"entry", msg.entry_id},
                      {"matching_idle", planned.matching_idle},
                      {"req_pressure", msg.req_pressure},
                      {"req_max_run", msg.req_max_run},
                      {"seq", msg.seq}});
    const auto entry = msg.entry_id;
    const auto seq = msg.seq;
    rt.send(planned.mailbox_address,
            Message::make(MsgType::RequestPut, {{"request", msg}, {"token", frontend_.config().mailbox_token.wire()}}),
            [this, entry, seq, &rt](const Message& reply) {
              if (reply.type != MsgType::RequestAck) return;
              if (reply.payload.value("accepted", false)) {
                frontend_.on_put_accepted(entry, seq);
              } else if (reason_of(reply) == Reject::StaleSequence) {
                const auto& s = reply.payload.at("stored_seq");
                frontend_.on_put_stale(entry, s.is_number() ? std::optional(s.get<std::uint64_t>()) : std::nullopt);
              } else {
                rt.record("request_rejected", {{"entry", entry}, {"reason", reply.payload.value("reason", "")}});
              }
            });
  }
  rt.record("frontend_cycle", {{"requests", logged}});
}

void FrontendService::requeued(const std::vector<JobId>& jobs, const char* reason, Runtime& rt) {
  for (auto j : jobs) rt.audit(subject_of(j), AuditVerb::Queued, {{"reason", reason}});
}

void FrontendService::negotiate(Runtime& rt) {
  std::vector<JobId> back;
  const auto expired = pool_.expire_ads(rt.now(), &back);
  for (auto g : expired) rt.record("ad_expired", {{"glidein_id", g.value}});
  requeued(back, "ad_expired", rt);

  const auto matches = pool_.negotiate(rt.now());
  for (const auto& m : matches) {
    const auto& job = pool_.jobs().at(m.job_id);
    const auto& ad = pool_.ads().at(m.glidein_id);
    rt.audit(subject_of(m.job_id), AuditVerb::Claimed, {{"glidein", m.glidein_id.value}});
    nlohmann::json p{{"job_id", m.job_id.value},
                     {"glidein_id", m.glidein_id.value},
                     {"requirements", job.requirements},
                     {"runtime_ms", to_ms(job.declared_runtime)},
                     {"fail", job.fail}};
    rt.send(ad.address, Message::make(MsgType::Claim, std::move(p)),
            [this, job = m.job_id, g = m.glidein_id, &rt](const Message& reply) { on_claim_reply(job, g, reply, rt); });
  }
}

void FrontendService::on_claim_reply(JobId job, GlideinId glidein, const Message& reply, Runtime& rt) {
  std::optional<ResourceSpec> remaining;
  if (reply.payload.is_object() && reply.payload.contains("remaining"))
    remaining = reply.payload["remaining"].get<ResourceSpec>();

  if (reply.type == MsgType::ClaimReply && reply.payload.value("accepted", false)) {
    const bool was_idle = pool_.jobs().at(job).state == JobState::Idle;
    const auto slot = reply.payload.at("slot_id").get<std::uint64_t>();
    const auto start = at_ms(reply.payload.at("start").get<std::int64_t>());
    auto r = pool_.claim_accepted(job, glidein, slot, start, remaining.value_or(ResourceSpec{}), rt.now());
    if (!r) {
      rt.record("claim_conflict", {{"job_id", job.value}, {"glidein_id", glidein.value}});
      return;
    }
    if (was_idle) rt.audit(subject_of(job), AuditVerb::Claimed, {{"glidein", glidein.value}});
    rt.audit(subject_of(job), AuditVerb::Started,
             {{"glidein", glidein.value}, {"slot", slot}, {"start", to_ms(start)}});
    return;
  }
  if (pool_.claim_refused(job, glidein, remaining, rt.now())) {
    auto reason = reason_of(reply);
    rt.audit(subject_of(job), AuditVerb::Queued,
             {{"reason", reason ? std::string(to_string(*reason)) : "claim-refused"}, {"glidein", glidein.value}});
  }
}

Message FrontendService::on_job_done(const Message& m, Runtime& rt) {
  const auto& p = m.payload;
  const auto job = job_field(p);
  ExecutionRecord rec{glidein_field(p), p.at("slot_id").get<std::uint64_t>(), at_ms(p.at("start").get<std::int64_t>()),
                      at_ms(p.at("end").get<std::int64_t>())};
  const bool failed = p.value("failed", false);
  auto state = pool_.job_finished(job, rec, failed, p.at("remaining").get<ResourceSpec>(), rt.now());
  if (!state) {
    // Duplicate delivery or a job this pool no longer tracks on that glidein.
    rt.record("job_done_ignored", {{"job_id", job.value}, {"glidein_id", rec.glidein.value}});
    return Message::make(MsgType::Ack, {{"ignored", true}});
  }
  rt.audit(subject_of(job), *state == JobState::Completed ? AuditVerb::Completed : AuditVerb::Failed,
           {{"glidein", rec.glidein.value},
            {"slot", rec.slot_id},
            {"start", to_ms(rec.start_time)},
            {"end", to_ms(rec.end_time)}});
  return Message::make(MsgType::Ack);
}

Message FrontendService::handle(const Message& m, Runtime& rt) {
  const auto& p = m.payload;
  switch (m.type) {
    case MsgType::JobSubmit: {
      const auto& j = p.at("job");
      JobSpec spec{j.value("owner", std::string()), j.at("requirements").get<ResourceSpec>(),
                   ms(j.at("runtime_ms").get<std::int64_t>()), j.value("fail", false)};
      auto token = token_field(p);
      Expected<JobId, Reject> id = unexpected(Reject::BadSignature);
      if (token) {
        id = submit_job(spec, *token, rt);
      } else {
        rt.audit("user.unknown", AuditVerb::RejectedAuth, {{"reason", "bad-signature"}, {"where", "pool"}});
      }
      if (!id) return reject_reply(MsgType::JobSubmitAck, id.error());
      return Message::make(MsgType::JobSubmitAck, {{"accepted", true}, {"job_id", id->value}});
    }
    case MsgType::EpRegister: {
      EpAd ad;
      ad.glidein_id = glidein_field(p);
      ad.client_id = p.at("client_id").get<std::string>();
      ad.entry_id = p.at("entry_id").get<std::string>();
      ad.address = p.at("address").get<std::string>();
      ad.detected = p.at("detected").get<ResourceSpec>();
      ad.remaining = p.at("remaining").get<ResourceSpec>();
      ad.retiring = p.value("retiring", false);
      pool_.register_ep(std::move(ad), rt.now());
      return Message::make(MsgType::Ack);
    }
    case MsgType::EpHeartbeat: {
      auto r = pool_.heartbeat(glidein_field(p), p.at("remaining").get<ResourceSpec>(), p.value("retiring", false),
                               rt.now());
      if (!r) return error_message(r.error());
      return Message::make(MsgType::Ack);
    }
    case MsgType::EpDeregister: {
      requeued(pool_.deregister(glidein_field(p), rt.now()), "deregistered", rt);
      return Message::make(MsgType::Ack);
    }
    case MsgType::EpJobDone: return on_job_done(m, rt);
    case MsgType::Query: {
      nlohmann::json jobs = nlohmann::json::array();
      for (const auto& [id, job] : pool_.jobs())
        jobs.push_back({{"job_id", id.value}, {"state", std::string(to_string(job.state))}});
      return Message::make(MsgType::QueryReply, {{"snapshot", pool_.query()}, {"jobs", jobs}});
    }
    default: return error_message(Reject::Malformed, "frontend does not take " + std::string(to_string(m.type)));
  }
}

}  // namespace glidemini
