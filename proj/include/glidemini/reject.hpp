#pragma once

#include <optional>
#include <string_view>

namespace glidemini {

/// Reasons an operation refuses its input. These travel on the wire as the
/// kebab-case strings returned by to_string().
enum class Reject {
  BadSignature,
  WrongAudience,
  WrongScope,
  Expired,
  NotYetValid,
  StaleSequence,
  UntrustedClient,
  DuplicateGlidein,
  UnknownGlidein,
  InsufficientResources,
  Retiring,
  UnknownSlot,
  UnknownJob,
  Unreachable,
  Malformed,
};

std::string_view to_string(Reject r);
std::optional<Reject> parse_reject(std::string_view s);

/// True for the reasons produced by token verification.
bool is_auth_reject(Reject r);

}  // namespace glidemini
