#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "glidemini/event_log.hpp"
#include "glidemini/ids.hpp"
#include "glidemini/time.hpp"

namespace glidemini {

enum class AuditVerb {
  Submitted,
  Queued,
  Assigned,
  Validated,
  Registered,
  Claimed,
  Started,
  Completed,
  Failed,
  Retiring,
  Done,
  RejectedAuth,
};

inline constexpr std::array kAllAuditVerbs{
    AuditVerb::Submitted, AuditVerb::Queued,    AuditVerb::Assigned,  AuditVerb::Validated,
    AuditVerb::Registered, AuditVerb::Claimed,  AuditVerb::Started,   AuditVerb::Completed,
    AuditVerb::Failed,    AuditVerb::Retiring,  AuditVerb::Done,      AuditVerb::RejectedAuth,
};

std::string_view to_string(AuditVerb v);
std::optional<AuditVerb> parse_audit_verb(std::string_view s);

class UnknownVerb : public std::invalid_argument {
 public:
  explicit UnknownVerb(std::string_view verb) : std::invalid_argument("unknown-verb: " + std::string(verb)) {}
};

/// Log entries carrying audit records use this kind.
inline constexpr std::string_view kAuditKind = "audit";

struct AuditRecord {
  SimTime time{};
  std::string service;
  std::string subject;  // "job.<id>", "glidein.<id>", or a client for auth failures
  AuditVerb action = AuditVerb::Submitted;
  nlohmann::json detail = nlohmann::json::object();

  nlohmann::json payload() const;
  /// Returns nullopt for non-audit entries; throws MalformedLog for audit
  /// entries that do not decode.
  static std::optional<AuditRecord> from_entry(const LogEntry& entry);
};

/// A service's own append-only audit trail.
class AuditLog {
 public:
  void emit(AuditRecord record);
  /// Throws UnknownVerb unless `verb` is in the closed set.
  void emit(SimTime time, std::string service, std::string subject, std::string_view verb,
            nlohmann::json detail = nlohmann::json::object());

  const std::vector<AuditRecord>& records() const { return records_; }

 private:
  std::vector<AuditRecord> records_;
};

/// Seconds the glidein spent registered but without any running job:
/// (end − registered) minus the measure of the union of its slot intervals.
/// Zero for pilots that failed before registering. Throws std::logic_error
/// if the glidein never reached a terminal state in `log`.
double waste(const EventLog& log, GlideinId glidein);

}  // namespace glidemini
