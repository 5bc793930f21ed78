#include "glidemini/credentials.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

#include "glidemini/crypto.hpp"
#include "glidemini/model.hpp"

namespace glidemini {

namespace fs = std::filesystem;

std::string_view to_string(Scope s) {
  switch (s) {
    case Scope::ComputeCreate: return "compute.create";
    case Scope::JobSubmit: return "job.submit";
    case Scope::MailboxWrite: return "mailbox.write";
  }
  return "?";
}

std::optional<Scope> parse_scope(std::string_view s) {
  for (auto v : {Scope::ComputeCreate, Scope::JobSubmit, Scope::MailboxWrite})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

namespace {

nlohmann::json unsigned_fields(const Token& t) {
  return nlohmann::json{{"subject", t.subject},
                        {"audience", t.audience},
                        {"scope", std::string(to_string(t.scope))},
                        {"issued_at", to_ms(t.issued_at)},
                        {"expires_at", to_ms(t.expires_at)}};
}

std::vector<std::uint8_t> read_key(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AuthorityError("cannot read secret file " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw AuthorityError("error reading secret file " + path.string());
  if (bytes.size() < Authority::kSecretBytes)
    throw AuthorityError("corrupt secret file " + path.string() + ": " + std::to_string(bytes.size()) + " bytes");
  return bytes;
}

std::vector<std::uint8_t> seeded_secret(std::uint64_t seed) {
  const auto d = crypto::sha256("glidemini-authority-seed:" + std::to_string(seed));
  return {d.begin(), d.end()};
}

}  // namespace

std::string Token::signing_input() const { return canonical(unsigned_fields(*this)); }

std::string Token::wire() const { return canonical(nlohmann::json(*this)); }

std::optional<Token> Token::from_wire(std::string_view bytes) {
  auto j = nlohmann::json::parse(bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  try {
    return j.get<Token>();
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void to_json(nlohmann::json& j, const Token& t) {
  j = unsigned_fields(t);
  j["signature"] = t.signature;
}

void from_json(const nlohmann::json& j, Token& t) {
  if (j.size() != 6) throw std::invalid_argument("token must have exactly six fields");
  t.subject = j.at("subject").get<std::string>();
  t.audience = j.at("audience").get<std::string>();
  auto scope = parse_scope(j.at("scope").get<std::string>());
  if (!scope) throw std::invalid_argument("unknown scope");
  t.scope = *scope;
  t.issued_at = at_ms(j.at("issued_at").get<std::int64_t>());
  t.expires_at = at_ms(j.at("expires_at").get<std::int64_t>());
  t.signature = j.at("signature").get<std::string>();
}

Authority::Authority(std::vector<std::uint8_t> secret) : secret_(std::move(secret)) {
  if (secret_.size() < kSecretBytes) throw AuthorityError("authority secret must be at least 32 bytes");
}

Authority Authority::from_seed(std::uint64_t seed) { return Authority(seeded_secret(seed)); }

Authority Authority::init(const fs::path& secret_dir, std::optional<std::uint64_t> seed) {
  const auto key_path = secret_dir / kKeyFile;
  std::error_code ec;
  if (fs::exists(key_path, ec)) return Authority(read_key(key_path));

  if (!fs::exists(secret_dir, ec)) {
    if (!fs::create_directories(secret_dir, ec) || ec)
      throw AuthorityError("cannot create secret directory " + secret_dir.string() + ": " + ec.message());
  }
  if (!fs::is_directory(secret_dir, ec)) throw AuthorityError(secret_dir.string() + " is not a directory");
  // Mode bits rather than access(2), so that the check holds when running as root.
  const auto perms = fs::status(secret_dir, ec).permissions();
  if (ec || (perms & fs::perms::owner_write) == fs::perms::none)
    throw AuthorityError("secret directory " + secret_dir.string() + " is not writable");

  auto secret = seed ? seeded_secret(*seed) : crypto::random_bytes(kSecretBytes);
  {
    std::ofstream out(key_path, std::ios::binary | std::ios::trunc);
    if (!out) throw AuthorityError("cannot write secret file " + key_path.string());
    out.write(reinterpret_cast<const char*>(secret.data()), static_cast<std::streamsize>(secret.size()));
    if (!out) throw AuthorityError("cannot write secret file " + key_path.string());
  }
  fs::permissions(key_path, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace, ec);
  if (ec) throw AuthorityError("cannot restrict permissions of " + key_path.string());
  return Authority(std::move(secret));
}

Token Authority::issue(std::string subject, std::string audience, Scope scope, Duration ttl, SimTime now) {
  if (ttl <= Duration::zero()) throw std::invalid_argument("token ttl must be positive");
  Token t{std::move(subject), std::move(audience), scope, now, now + ttl, {}};
  t.signature = sign(t.signing_input());
  issued_log_.push_back({t.subject, t.audience, t.scope, t.expires_at});
  return t;
}

Expected<std::string, Reject> Authority::verify(const Token& token, std::string_view expected_audience,
                                                Scope required_scope, SimTime now) const {
  if (!verify_signature(token.signing_input(), token.signature)) return unexpected(Reject::BadSignature);
  if (token.audience != expected_audience) return unexpected(Reject::WrongAudience);
  if (token.scope != required_scope) return unexpected(Reject::WrongScope);
  if (now < token.issued_at) return unexpected(Reject::NotYetValid);
  if (now >= token.expires_at) return unexpected(Reject::Expired);
  return token.subject;
}

Expected<std::string, Reject> Authority::verify_wire(std::string_view token_bytes, std::string_view expected_audience,
                                                     Scope required_scope, SimTime now) const {
  auto token = Token::from_wire(token_bytes);
  if (!token) return unexpected(Reject::BadSignature);
  // A re-serialization mismatch means the bytes were not the canonical form
  // that was signed.
  if (token->wire() != token_bytes) return unexpected(Reject::BadSignature);
  return verify(*token, expected_audience, required_scope, now);
}

Expected<Token, Reject> Authority::refresh(const Token& token, Duration ttl, SimTime now) {
  if (!verify_signature(token.signing_input(), token.signature)) return unexpected(Reject::BadSignature);
  return issue(token.subject, token.audience, token.scope, ttl, now);
}

std::string Authority::sign(std::string_view canonical_bytes) const {
  const auto mac = crypto::hmac_sha256(secret_, canonical_bytes);
  return crypto::to_hex(mac);
}

bool Authority::verify_signature(std::string_view canonical_bytes, std::string_view signature_hex) const {
  return crypto::equal_constant_time(sign(canonical_bytes), signature_hex);
}

}  // namespace glidemini
