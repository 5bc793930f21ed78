#include "glidemini/audit.hpp"

namespace glidemini {

std::string_view to_string(AuditVerb v) {
  switch (v) {
    case AuditVerb::Submitted: return "submitted";
    case AuditVerb::Queued: return "queued";
    case AuditVerb::Assigned: return "assigned";
    case AuditVerb::Validated: return "validated";
    case AuditVerb::Registered: return "registered";
    case AuditVerb::Claimed: return "claimed";
    case AuditVerb::Started: return "started";
    case AuditVerb::Completed: return "completed";
    case AuditVerb::Failed: return "failed";
    case AuditVerb::Retiring: return "retiring";
    case AuditVerb::Done: return "done";
    case AuditVerb::RejectedAuth: return "rejected_auth";
  }
  return "?";
}

std::optional<AuditVerb> parse_audit_verb(std::string_view s) {
  for (auto v : kAllAuditVerbs)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

nlohmann::json AuditRecord::payload() const {
  return {{"subject", subject}, {"action", std::string(to_string(action))}, {"detail", detail}};
}

std::optional<AuditRecord> AuditRecord::from_entry(const LogEntry& entry) {
  if (entry.kind != kAuditKind) return std::nullopt;
  const auto& p = entry.payload;
  if (!p.is_object() || !p.contains("subject") || !p.contains("action") || !p.contains("detail") ||
      !p["subject"].is_string() || !p["action"].is_string())
    throw MalformedLog("audit entry " + std::to_string(entry.seq) + " lacks subject/action/detail");
  auto verb = parse_audit_verb(p["action"].get<std::string>());
  if (!verb) throw MalformedLog("audit entry " + std::to_string(entry.seq) + " has unknown verb");
  return AuditRecord{entry.time, entry.service, p["subject"].get<std::string>(), *verb, p["detail"]};
}

void AuditLog::emit(AuditRecord record) { records_.push_back(std::move(record)); }

void AuditLog::emit(SimTime time, std::string service, std::string subject, std::string_view verb,
                    nlohmann::json detail) {
  auto v = parse_audit_verb(verb);
  if (!v) throw UnknownVerb(verb);
  emit(AuditRecord{time, std::move(service), std::move(subject), *v, std::move(detail)});
}

}  // namespace glidemini
