#include "glidemini/ce.hpp"

#include <algorithm>
#include <stdexcept>

namespace glidemini {

void CeConfig::validate() const {
  if (audience.empty()) throw std::invalid_argument("ce audience must not be empty");
  if (nodes.empty()) throw std::invalid_argument("ce needs at least one node");
  std::set<std::string> ids;
  for (const auto& n : nodes) {
    if (!ids.insert(n.node_id).second) throw std::invalid_argument("duplicate node id " + n.node_id);
    if (!n.actual.is_valid() || !n.advertised.is_valid())
      throw std::invalid_argument("node " + n.node_id + " has negative resources");
  }
  if (cycle_period <= Duration::zero()) throw std::invalid_argument("ce cycle period must be positive");
  if (startup_delay < Duration::zero()) throw std::invalid_argument("startup delay must be non-negative");
  if (validation_failure_prob < 0.0 || validation_failure_prob > 1.0)
    throw std::invalid_argument("validation_failure_prob must be within [0, 1]");
}

ComputeEntrypoint::ComputeEntrypoint(CeConfig config, std::shared_ptr<const Authority> authority)
    : config_(std::move(config)), authority_(std::move(authority)) {
  config_.validate();
  if (!authority_) throw std::invalid_argument("ce needs an authority");
  nodes_ = config_.nodes;
  for (auto& n : nodes_) n.occupant.reset();
  std::sort(nodes_.begin(), nodes_.end(),
            [](const NodeDescriptor& a, const NodeDescriptor& b) { return a.node_id < b.node_id; });
}

Expected<void, Reject> ComputeEntrypoint::submit_glidein(const GlideinSubmission& submission, SimTime now) {
  auto subject = authority_->verify(submission.token, config_.audience, Scope::ComputeCreate, now);
  if (!subject) return unexpected(subject.error());
  if (accepted_.contains(submission.glidein_id)) return unexpected(Reject::DuplicateGlidein);
  accepted_.insert(submission.glidein_id);
  accepted_order_.push_back(submission.glidein_id);
  queue_.push_back({submission.glidein_id, submission.client_id, submission.entry_id, now});
  return {};
}

std::vector<Assignment> ComputeEntrypoint::cycle(SimTime now) {
  if (last_cycle_ && now < *last_cycle_ + config_.cycle_period)
    throw std::logic_error("ce cycle invoked before its period elapsed");
  last_cycle_ = now;

  std::vector<Assignment> out;
  for (auto& node : nodes_) {
    if (queue_.empty()) break;
    if (node.occupant) continue;
    auto g = queue_.front();
    queue_.pop_front();
    node.occupant = g.glidein_id;
    out.push_back({std::move(g), node.node_id, now + config_.startup_delay});
  }
  return out;
}

Expected<std::string, Reject> ComputeEntrypoint::release_node(GlideinId id, SimTime) {
  for (auto& node : nodes_) {
    if (node.occupant == id) {
      node.occupant.reset();
      return node.node_id;
    }
  }
  return unexpected(Reject::UnknownGlidein);
}

const NodeDescriptor* ComputeEntrypoint::node_of(GlideinId id) const {
  for (const auto& node : nodes_)
    if (node.occupant == id) return &node;
  return nullptr;
}

}  // namespace glidemini
