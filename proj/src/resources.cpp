#include "glidemini/resources.hpp"

#include "glidemini/reject.hpp"

#include <array>
#include <utility>

namespace glidemini {

namespace {

constexpr std::array<std::pair<Reject, std::string_view>, 15> kRejectNames{{
    {Reject::BadSignature, "bad-signature"},
    {Reject::WrongAudience, "wrong-audience"},
    {Reject::WrongScope, "wrong-scope"},
    {Reject::Expired, "expired"},
    {Reject::NotYetValid, "not-yet-valid"},
    {Reject::StaleSequence, "stale-sequence"},
    {Reject::UntrustedClient, "untrusted-client"},
    {Reject::DuplicateGlidein, "duplicate-glidein"},
    {Reject::UnknownGlidein, "unknown-glidein"},
    {Reject::InsufficientResources, "insufficient-resources"},
    {Reject::Retiring, "retiring"},
    {Reject::UnknownSlot, "unknown-slot"},
    {Reject::UnknownJob, "unknown-job"},
    {Reject::Unreachable, "unreachable"},
    {Reject::Malformed, "malformed"},
}};

}  // namespace

std::string_view to_string(Reject r) {
  for (const auto& [k, name] : kRejectNames)
    if (k == r) return name;
  return "unknown";
}

std::optional<Reject> parse_reject(std::string_view s) {
  for (const auto& [k, name] : kRejectNames)
    if (name == s) return k;
  return std::nullopt;
}

bool is_auth_reject(Reject r) {
  switch (r) {
    case Reject::BadSignature:
    case Reject::WrongAudience:
    case Reject::WrongScope:
    case Reject::Expired:
    case Reject::NotYetValid:
      return true;
    default:
      return false;
  }
}

bool fits(const ResourceSpec& requirements, const ResourceSpec& available) {
  return requirements.cores <= available.cores && requirements.memory_mb <= available.memory_mb &&
         requirements.disk_mb <= available.disk_mb && requirements.gpus <= available.gpus;
}

ResourceSpec carve(const ResourceSpec& available, const ResourceSpec& requirements) {
  if (!fits(requirements, available))
    throw ResourceUnderflow("cannot carve " + to_string(requirements) + " out of " + to_string(available));
  return ResourceSpec{available.cores - requirements.cores, available.memory_mb - requirements.memory_mb,
                      available.disk_mb - requirements.disk_mb, available.gpus - requirements.gpus};
}

ResourceSpec release(const ResourceSpec& remaining, const ResourceSpec& carved) { return remaining + carved; }

std::string to_string(const ResourceSpec& r) {
  return "(" + std::to_string(r.cores) + "c," + std::to_string(r.memory_mb) + "MB," + std::to_string(r.disk_mb) +
         "MB disk," + std::to_string(r.gpus) + "gpu)";
}

void to_json(nlohmann::json& j, const ResourceSpec& r) {
  j = nlohmann::json{{"cores", r.cores}, {"memory_mb", r.memory_mb}, {"disk_mb", r.disk_mb}, {"gpus", r.gpus}};
}

void from_json(const nlohmann::json& j, ResourceSpec& r) {
  r.cores = j.value("cores", std::int64_t{0});
  r.memory_mb = j.value("memory_mb", std::int64_t{0});
  r.disk_mb = j.value("disk_mb", std::int64_t{0});
  r.gpus = j.value("gpus", std::int64_t{0});
  if (!r.is_valid()) throw std::invalid_argument("resource quantities must be non-negative: " + j.dump());
}

}  // namespace glidemini
