#include "glidemini/message.hpp"

#include <array>
#include <utility>

#include "glidemini/model.hpp"

namespace glidemini {
namespace {

constexpr std::array<std::pair<MsgType, std::string_view>, 29> kNames{{
    {MsgType::Ping, "PING"},
    {MsgType::Pong, "PONG"},
    {MsgType::Ack, "ACK"},
    {MsgType::Error, "ERROR"},
    {MsgType::RequestPut, "REQUEST_PUT"},
    {MsgType::RequestAck, "REQUEST_ACK"},
    {MsgType::StatusGet, "STATUS_GET"},
    {MsgType::StatusReply, "STATUS_REPLY"},
    {MsgType::GlideinSubmit, "GLIDEIN_SUBMIT"},
    {MsgType::GlideinSubmitAck, "GLIDEIN_SUBMIT_ACK"},
    {MsgType::GlideinRetire, "GLIDEIN_RETIRE"},
    {MsgType::Queue, "QUEUE"},
    {MsgType::Start, "START"},
    {MsgType::Registered, "REGISTERED"},
    {MsgType::Running, "RUNNING"},
    {MsgType::Idle, "IDLE"},
    {MsgType::Retiring, "RETIRING"},
    {MsgType::Done, "DONE"},
    {MsgType::Fail, "FAIL"},
    {MsgType::EpRegister, "EP_REGISTER"},
    {MsgType::EpHeartbeat, "EP_HEARTBEAT"},
    {MsgType::EpDeregister, "EP_DEREGISTER"},
    {MsgType::Claim, "CLAIM"},
    {MsgType::ClaimReply, "CLAIM_REPLY"},
    {MsgType::EpJobDone, "EP_JOB_DONE"},
    {MsgType::JobSubmit, "JOB_SUBMIT"},
    {MsgType::JobSubmitAck, "JOB_SUBMIT_ACK"},
    {MsgType::Query, "QUERY"},
    {MsgType::QueryReply, "QUERY_REPLY"},
}};

}  // namespace

std::string_view to_string(MsgType t) {
  for (const auto& [type, name] : kNames)
    if (type == t) return name;
  return "?";
}

std::optional<MsgType> parse_msg_type(std::string_view s) {
  for (const auto& [type, name] : kNames)
    if (name == s) return type;
  return std::nullopt;
}

std::string Message::signing_input() const {
  return canonical({{"type", std::string(to_string(type))}, {"sender", sender}, {"seq", seq}, {"payload", payload}});
}

std::string Message::encode() const {
  return canonical({{"type", std::string(to_string(type))},
                    {"sender", sender},
                    {"seq", seq},
                    {"payload", payload},
                    {"signature", signature}});
}

Expected<Message, std::string> Message::decode(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    return unexpected(std::string("unparseable message"));
  }
  if (!j.is_object()) return unexpected(std::string("message is not an object"));
  for (const char* f : {"type", "sender", "seq", "payload", "signature"})
    if (!j.contains(f)) return unexpected("message lacks field " + std::string(f));
  if (!j["type"].is_string() || !j["sender"].is_string() || !j["seq"].is_number_unsigned() ||
      !j["signature"].is_string())
    return unexpected(std::string("message field has the wrong type"));
  auto type = parse_msg_type(j["type"].get<std::string>());
  if (!type) return unexpected("unknown message type " + j["type"].get<std::string>());
  Message m;
  m.type = *type;
  m.sender = j["sender"].get<std::string>();
  m.seq = j["seq"].get<std::uint64_t>();
  m.payload = j["payload"];
  m.signature = j["signature"].get<std::string>();
  return m;
}

Message error_message(Reject reason, std::string detail) {
  nlohmann::json p{{"reason", std::string(to_string(reason))}};
  if (!detail.empty()) p["detail"] = std::move(detail);
  return Message::make(MsgType::Error, std::move(p));
}

std::optional<Reject> reason_of(const Message& m) {
  if (!m.payload.is_object() || !m.payload.contains("reason") || !m.payload["reason"].is_string())
    return std::nullopt;
  return parse_reject(m.payload["reason"].get<std::string>());
}

}  // namespace glidemini
