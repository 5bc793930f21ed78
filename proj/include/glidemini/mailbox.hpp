#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "glidemini/credentials.hpp"
#include "glidemini/expected.hpp"
#include "glidemini/state_machine.hpp"
#include "glidemini/time.hpp"

namespace glidemini {

/// A client's provisioning desire for one entry. Only the newest message per
/// (client_id, entry_id) matters.
struct RequestMessage {
  std::string client_id;
  std::string entry_id;
  std::uint64_t seq = 0;
  std::int64_t req_pressure = 0;
  std::int64_t req_max_run = 0;
  Token credential;  // compute.create, audience = the entry's CE
  SimTime sent_at{};
  std::string signature;

  /// Canonical serialization of every field except the envelope signature.
  std::string envelope_bytes() const;
  void sign(const Authority& authority) { signature = authority.sign(envelope_bytes()); }
};

using StateCounts = std::map<GlideinState, std::int64_t>;

struct FactoryStatusMessage {
  std::string entry_id;
  std::uint64_t seq = 0;
  std::map<std::string, StateCounts> counts;  // client_id -> state -> count
  SimTime sent_at{};

  friend bool operator==(const FactoryStatusMessage&, const FactoryStatusMessage&) = default;
};

void to_json(nlohmann::json& j, const RequestMessage& m);
void from_json(const nlohmann::json& j, RequestMessage& m);
void to_json(nlohmann::json& j, const FactoryStatusMessage& m);
void from_json(const nlohmann::json& j, FactoryStatusMessage& m);

struct PutAck {
  std::uint64_t stored_seq = 0;
};

/// The Factory-hosted latest-value exchange. All access is serialized by the
/// owning service's event loop.
class Mailbox {
 public:
  /// `audience` is what writer tokens must name (the Factory's hostname).
  explicit Mailbox(std::string audience) : audience_(std::move(audience)) {}

  /// Stores `msg` iff the writer token grants mailbox.write for this mailbox
  /// to msg.client_id, the envelope signature verifies, and msg.seq exceeds
  /// the last accepted seq for its key. Replaces the previous message.
  Expected<PutAck, Reject> put_request(const Authority& authority, const RequestMessage& msg, const Token& writer,
                                       SimTime now);

  /// Fresh requests for `entry_id`, one per client, ordered by client_id.
  /// Requests older than `ttl` are dropped from the box. Throws if ttl <= 0.
  std::vector<RequestMessage> fetch_requests(const std::string& entry_id, SimTime now, Duration ttl);

  void publish_status(FactoryStatusMessage status);

  /// Latest status per entry, ordered by entry_id, restricted to
  /// `client_id`'s counts. An empty client_id returns every client's counts.
  std::vector<FactoryStatusMessage> fetch_status(const std::string& client_id) const;

  /// Highest accepted seq for a key, if any message was ever accepted.
  std::optional<std::uint64_t> last_seq(const std::string& client_id, const std::string& entry_id) const;

  const std::string& audience() const { return audience_; }
  std::size_t stored_requests() const { return requests_.size(); }

 private:
  using Key = std::pair<std::string, std::string>;  // (entry_id, client_id)

  std::string audience_;
  std::map<Key, RequestMessage> requests_;
  std::map<Key, std::uint64_t> high_water_;
  std::map<std::string, FactoryStatusMessage> statuses_;
};

}  // namespace glidemini
