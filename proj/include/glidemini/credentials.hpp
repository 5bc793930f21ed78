#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "glidemini/expected.hpp"
#include "glidemini/reject.hpp"
#include "glidemini/time.hpp"

namespace glidemini {

enum class Scope { ComputeCreate, JobSubmit, MailboxWrite };

std::string_view to_string(Scope s);
std::optional<Scope> parse_scope(std::string_view s);

/// Audience-bound, scoped, expiring bearer token. Valid on the half-open
/// interval [issued_at, expires_at).
struct Token {
  std::string subject;
  std::string audience;
  Scope scope = Scope::ComputeCreate;
  SimTime issued_at{};
  SimTime expires_at{};
  std::string signature;  // lowercase hex HMAC-SHA256

  /// Canonical serialization of every field except the signature.
  std::string signing_input() const;
  /// Wire form: canonical serialization including the hex signature.
  std::string wire() const;
  /// Parses the wire form; returns nullopt on any structural problem.
  static std::optional<Token> from_wire(std::string_view bytes);

  friend bool operator==(const Token&, const Token&) = default;
};

void to_json(nlohmann::json& j, const Token& t);
void from_json(const nlohmann::json& j, Token& t);

struct IssuedEntry {
  std::string subject;
  std::string audience;
  Scope scope;
  SimTime expires_at;
};

class AuthorityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Local token authority holding the shared signing secret.
///
/// Issuance appends to the issued log, so callers serialize mutations;
/// verification is const and may run concurrently.
class Authority {
 public:
  static constexpr std::size_t kSecretBytes = 32;
  static constexpr std::string_view kKeyFile = "authority.key";

  /// Creates <secret_dir>/authority.key if absent (random, or derived from
  /// `seed`), otherwise loads it. Throws AuthorityError if the directory is
  /// not writable when a key must be created, or the key file is corrupt.
  static Authority init(const std::filesystem::path& secret_dir, std::optional<std::uint64_t> seed = std::nullopt);

  /// In-memory authority whose secret is a pure function of `seed`; nothing
  /// is written to disk. Used by the simulator.
  static Authority from_seed(std::uint64_t seed);

  explicit Authority(std::vector<std::uint8_t> secret);

  /// Throws std::invalid_argument if ttl <= 0.
  Token issue(std::string subject, std::string audience, Scope scope, Duration ttl, SimTime now);

  /// Returns the subject iff the signature verifies, audience and scope match,
  /// and issued_at <= now < expires_at.
  Expected<std::string, Reject> verify(const Token& token, std::string_view expected_audience, Scope required_scope,
                                       SimTime now) const;
  /// Same check on raw wire bytes; unparseable input is a bad signature.
  Expected<std::string, Reject> verify_wire(std::string_view token_bytes, std::string_view expected_audience,
                                            Scope required_scope, SimTime now) const;

  /// New token with the same subject/audience/scope valid for `ttl` from
  /// `now`. The input may be expired but must carry a valid signature.
  Expected<Token, Reject> refresh(const Token& token, Duration ttl, SimTime now);

  std::string sign(std::string_view canonical_bytes) const;
  bool verify_signature(std::string_view canonical_bytes, std::string_view signature_hex) const;

  const std::vector<IssuedEntry>& issued_log() const { return issued_log_; }
  const std::vector<std::uint8_t>& secret() const { return secret_; }

 private:
  std::vector<std::uint8_t> secret_;
  std::vector<IssuedEntry> issued_log_;
};

}  // namespace glidemini
