#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "glidemini/credentials.hpp"
#include "glidemini/expected.hpp"

namespace glidemini {

enum class MsgType {
  Ping,
  Pong,
  Ack,
  Error,
  // mailbox, hosted by the factory
  RequestPut,
  RequestAck,
  StatusGet,
  StatusReply,
  // factory -> CE
  GlideinSubmit,
  GlideinSubmitAck,
  GlideinRetire,
  // CE -> factory lifecycle notifications
  Queue,
  Start,
  Registered,
  Running,
  Idle,
  Retiring,
  Done,
  Fail,
  // glidein <-> pool
  EpRegister,
  EpHeartbeat,
  EpDeregister,
  Claim,
  ClaimReply,
  EpJobDone,
  // users -> pool
  JobSubmit,
  JobSubmitAck,
  Query,
  QueryReply,
};

std::string_view to_string(MsgType t);
std::optional<MsgType> parse_msg_type(std::string_view s);

/// One wire message. `sender` is the sender's hostname:port (or a client
/// name for the CLI). The signature is an HMAC over the canonical form of
/// the other four fields.
struct Message {
  MsgType type = MsgType::Ack;
  std::string sender;
  std::uint64_t seq = 0;
  nlohmann::json payload = nlohmann::json::object();
  std::string signature;

  std::string signing_input() const;
  void sign(const Authority& authority) { signature = authority.sign(signing_input()); }
  bool verify(const Authority& authority) const { return authority.verify_signature(signing_input(), signature); }

  /// Canonical single line, no trailing newline.
  std::string encode() const;
  /// Errors name the problem: unparseable, missing field, or unknown type.
  static Expected<Message, std::string> decode(std::string_view line);

  static Message make(MsgType type, nlohmann::json payload = nlohmann::json::object()) {
    Message m;
    m.type = type;
    m.payload = std::move(payload);
    return m;
  }
};

/// ERROR message carrying a rejection reason.
Message error_message(Reject reason, std::string detail = {});
/// The reason carried by an ERROR (or any payload with "reason").
std::optional<Reject> reason_of(const Message& m);

}  // namespace glidemini
