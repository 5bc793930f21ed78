#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "glidemini/credentials.hpp"
#include "glidemini/expected.hpp"
#include "glidemini/glidein_agent.hpp"
#include "glidemini/ids.hpp"
#include "glidemini/resources.hpp"

namespace glidemini {

/// A batch node. `advertised` may exceed `actual`; pilots only ever see the
/// advertised spec.
struct NodeDescriptor {
  std::string node_id;
  ResourceSpec actual;
  ResourceSpec advertised;
  std::optional<GlideinId> occupant;
};

struct CeConfig {
  std::string audience;
  std::vector<NodeDescriptor> nodes;
  Duration cycle_period = secs(1);
  Duration startup_delay = secs(3);
  double validation_failure_prob = 0.0;
  GlideinPolicy glidein;

  void validate() const;
};

struct GlideinSubmission {
  GlideinId glidein_id;
  std::string client_id;
  std::string entry_id;
  Token token;
};

struct QueuedGlidein {
  GlideinId glidein_id;
  std::string client_id;
  std::string entry_id;
  SimTime enqueue_time{};
};

struct Assignment {
  QueuedGlidein glidein;
  std::string node_id;
  SimTime start_at{};
};

/// Token-authenticated gateway plus a FIFO whole-node batch queue.
class ComputeEntrypoint {
 public:
  ComputeEntrypoint(CeConfig config, std::shared_ptr<const Authority> authority);

  /// Enqueues the glidein iff its token grants compute.create for this CE.
  Expected<void, Reject> submit_glidein(const GlideinSubmission& submission, SimTime now);

  /// Dequeues FIFO onto free nodes, lowest node_id first. Throws
  /// std::logic_error if called before previous + cycle_period.
  std::vector<Assignment> cycle(SimTime now);

  /// Frees the node held by `id`; returns its node_id.
  Expected<std::string, Reject> release_node(GlideinId id, SimTime now);

  const NodeDescriptor* node_of(GlideinId id) const;
  const std::vector<NodeDescriptor>& nodes() const { return nodes_; }
  const std::deque<QueuedGlidein>& queue() const { return queue_; }
  const CeConfig& config() const { return config_; }
  /// Every glidein ever accepted, in acceptance order.
  const std::vector<GlideinId>& accepted() const { return accepted_order_; }
  bool was_accepted(GlideinId id) const { return accepted_.contains(id); }

 private:
  CeConfig config_;
  std::shared_ptr<const Authority> authority_;
  std::vector<NodeDescriptor> nodes_;
  std::deque<QueuedGlidein> queue_;
  std::set<GlideinId> accepted_;
  std::vector<GlideinId> accepted_order_;
  std::optional<SimTime> last_cycle_;
};

}  // namespace glidemini
