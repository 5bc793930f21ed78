#include "glidemini/mailbox.hpp"

#include <stdexcept>

#include "glidemini/model.hpp"

namespace glidemini {

namespace {

nlohmann::json envelope_fields(const RequestMessage& m) {
  return nlohmann::json{{"client_id", m.client_id},     {"entry_id", m.entry_id},
                        {"seq", m.seq},                 {"req_pressure", m.req_pressure},
                        {"req_max_run", m.req_max_run}, {"credential", m.credential},
                        {"sent_at", to_ms(m.sent_at)}};
}

}  // namespace

std::string RequestMessage::envelope_bytes() const { return canonical(envelope_fields(*this)); }

void to_json(nlohmann::json& j, const RequestMessage& m) {
  j = envelope_fields(m);
  j["signature"] = m.signature;
}

void from_json(const nlohmann::json& j, RequestMessage& m) {
  m.client_id = j.at("client_id").get<std::string>();
  m.entry_id = j.at("entry_id").get<std::string>();
  m.seq = j.at("seq").get<std::uint64_t>();
  m.req_pressure = j.at("req_pressure").get<std::int64_t>();
  m.req_max_run = j.at("req_max_run").get<std::int64_t>();
  if (m.req_pressure < 0 || m.req_max_run < 0) throw std::invalid_argument("request counts must be non-negative");
  m.credential = j.at("credential").get<Token>();
  m.sent_at = at_ms(j.at("sent_at").get<std::int64_t>());
  m.signature = j.at("signature").get<std::string>();
}

void to_json(nlohmann::json& j, const FactoryStatusMessage& m) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [client, by_state] : m.counts) {
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [state, n] : by_state) c[std::string(to_string(state))] = n;
    counts[client] = std::move(c);
  }
  j = nlohmann::json{{"entry_id", m.entry_id}, {"seq", m.seq}, {"counts", counts}, {"sent_at", to_ms(m.sent_at)}};
}

void from_json(const nlohmann::json& j, FactoryStatusMessage& m) {
  m.entry_id = j.at("entry_id").get<std::string>();
  m.seq = j.at("seq").get<std::uint64_t>();
  m.sent_at = at_ms(j.at("sent_at").get<std::int64_t>());
  m.counts.clear();
  for (const auto& [client, by_state] : j.at("counts").items()) {
    auto& dst = m.counts[client];
    for (const auto& [state, n] : by_state.items()) {
      auto s = parse_glidein_state(state);
      if (!s) throw std::invalid_argument("unknown glidein state " + state);
      const auto v = n.get<std::int64_t>();
      if (v < 0) throw std::invalid_argument("status counts must be non-negative");
      dst[*s] = v;
    }
  }
}

Expected<PutAck, Reject> Mailbox::put_request(const Authority& authority, const RequestMessage& msg,
                                              const Token& writer, SimTime now) {
  auto who = authority.verify(writer, audience_, Scope::MailboxWrite, now);
  if (!who) return unexpected(who.error());
  if (*who != msg.client_id) return unexpected(Reject::UntrustedClient);
  if (!authority.verify_signature(msg.envelope_bytes(), msg.signature)) return unexpected(Reject::BadSignature);

  const Key key{msg.entry_id, msg.client_id};
  if (auto it = high_water_.find(key); it != high_water_.end() && msg.seq <= it->second)
    return unexpected(Reject::StaleSequence);
  high_water_[key] = msg.seq;
  requests_[key] = msg;
  return PutAck{msg.seq};
}

std::vector<RequestMessage> Mailbox::fetch_requests(const std::string& entry_id, SimTime now, Duration ttl) {
  if (ttl <= Duration::zero()) throw std::invalid_argument("request ttl must be positive");
  std::vector<RequestMessage> out;
  auto it = requests_.lower_bound(Key{entry_id, std::string{}});
  while (it != requests_.end() && it->first.first == entry_id) {
    if (now - it->second.sent_at > ttl) {
      it = requests_.erase(it);
      continue;
    }
    out.push_back(it->second);
    ++it;
  }
  return out;
}

void Mailbox::publish_status(FactoryStatusMessage status) {
  auto key = status.entry_id;
  statuses_.insert_or_assign(std::move(key), std::move(status));
}

std::vector<FactoryStatusMessage> Mailbox::fetch_status(const std::string& client_id) const {
  std::vector<FactoryStatusMessage> out;
  out.reserve(statuses_.size());
  for (const auto& [entry, status] : statuses_) {
    if (client_id.empty()) {
      out.push_back(status);
      continue;
    }
    FactoryStatusMessage filtered{status.entry_id, status.seq, {}, status.sent_at};
    if (auto it = status.counts.find(client_id); it != status.counts.end()) filtered.counts.insert(*it);
    out.push_back(std::move(filtered));
  }
  return out;
}

std::optional<std::uint64_t> Mailbox::last_seq(const std::string& client_id, const std::string& entry_id) const {
  if (auto it = high_water_.find(Key{entry_id, client_id}); it != high_water_.end()) return it->second;
  return std::nullopt;
}

}  // namespace glidemini
