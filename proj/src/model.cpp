#include "glidemini/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace glidemini {

std::string canonical(const nlohmann::json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

void GlideinRecord::apply(GlideinEvent e, std::optional<ResourceSpec> detected_resources) {
  const auto next = transition(state, e);
  if (e == GlideinEvent::Registered) {
    if (!detected_resources) throw std::invalid_argument("registration must report detected resources");
    detected = detected_resources;
  }
  if (next == GlideinState::Failed) detected.reset();
  state = next;
}

void EntryDescriptor::validate() const {
  if (entry_id.empty()) throw std::invalid_argument("entry_id must not be empty");
  if (max_pressure < 1) throw std::invalid_argument("entry " + entry_id + ": max_pressure must be >= 1");
  if (max_submit_per_cycle < 1)
    throw std::invalid_argument("entry " + entry_id + ": max_submit_per_cycle must be >= 1");
}

bool EntryDescriptor::trusts(const std::string& client_id) const {
  return std::find(trusted_clients.begin(), trusted_clients.end(), client_id) != trusted_clients.end();
}

void to_json(nlohmann::json& j, const ExecutionRecord& r) {
  j = nlohmann::json{{"glidein_id", r.glidein.value},
                     {"slot_id", r.slot_id},
                     {"start_time", to_ms(r.start_time)},
                     {"end_time", to_ms(r.end_time)}};
}

void from_json(const nlohmann::json& j, ExecutionRecord& r) {
  r.glidein = GlideinId{j.at("glidein_id").get<std::uint64_t>()};
  r.slot_id = j.at("slot_id").get<std::uint64_t>();
  r.start_time = at_ms(j.at("start_time").get<std::int64_t>());
  r.end_time = at_ms(j.at("end_time").get<std::int64_t>());
}

void to_json(nlohmann::json& j, const Job& job) {
  j = nlohmann::json{{"job_id", job.job_id.value},
                     {"owner", job.owner},
                     {"submit_time", to_ms(job.submit_time)},
                     {"requirements", job.requirements},
                     {"declared_runtime", to_ms(job.declared_runtime)},
                     {"state", std::string(to_string(job.state))}};
  if (job.execution_record) j["execution_record"] = *job.execution_record;
}

void to_json(nlohmann::json& j, const GlideinRecord& g) {
  j = nlohmann::json{{"glidein_id", g.glidein_id.value},
                     {"entry_id", g.entry_id},
                     {"client_id", g.client_id},
                     {"state", std::string(to_string(g.state))},
                     {"submit_time", to_ms(g.submit_time)},
                     {"jobs_served", g.jobs_served}};
  if (g.detected) j["detected"] = *g.detected;
}

void to_json(nlohmann::json& j, const EntryDescriptor& e) {
  j = nlohmann::json{{"entry_id", e.entry_id},
                     {"ce_address", e.ce_address},
                     {"audience", e.audience},
                     {"max_pressure", e.max_pressure},
                     {"max_submit_per_cycle", e.max_submit_per_cycle},
                     {"trusted_clients", e.trusted_clients}};
}

void from_json(const nlohmann::json& j, EntryDescriptor& e) {
  e.entry_id = j.at("entry_id").get<std::string>();
  e.ce_address = j.at("ce_address").get<std::string>();
  e.audience = j.value("audience", std::string{});
  e.max_pressure = j.at("max_pressure").get<std::int64_t>();
  e.max_submit_per_cycle = j.at("max_submit_per_cycle").get<std::int64_t>();
  e.trusted_clients = j.value("trusted_clients", std::vector<std::string>{});
}

}  // namespace glidemini
