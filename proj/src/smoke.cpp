#include "glidemini/smoke.hpp"

#include <algorithm>
#include <thread>

namespace glidemini {

nlohmann::json SmokeReport::to_json() const {
  return {{"pass", pass},
          {"reason", reason},
          {"metrics", metrics.to_json()},
          {"completed_jobs", completed_jobs},
          {"glidein_states", glidein_states},
          {"wall_s", wall_s},
          {"log_hash", log_hash}};
}

SmokeReport judge_smoke(const EventLog& log, std::int64_t expected_jobs) {
  SmokeReport r;
  r.log_hash = log.hash();
  AuditReplay rp;
  try {
    rp = replay_audit(log);
    r.metrics = metrics_report(log);
  } catch (const std::exception& e) {
    r.reason = std::string("log does not replay: ") + e.what();
    return r;
  }
  for (const auto& [id, job] : rp.jobs)
    if (job.state == JobState::Completed) r.completed_jobs.push_back(id.value);
  std::int64_t open = 0;
  for (const auto& [id, g] : rp.glideins) {
    ++r.glidein_states[std::string(to_string(g.state))];
    if (!is_terminal(g.state)) ++open;
  }
  const auto completed = static_cast<std::int64_t>(r.completed_jobs.size());
  if (completed != expected_jobs) {
    r.reason = std::to_string(completed) + "/" + std::to_string(expected_jobs) + " jobs completed";
  } else if (open > 0) {
    r.reason = std::to_string(open) + " glideins not terminal";
  } else {
    r.pass = true;
  }
  return r;
}

SmokeReport smoke_test_sim(const TopologyConfig& topology, SimOptions options) {
  const auto started = std::chrono::steady_clock::now();
  const auto workload = smoke_workload();
  Simulation sim(topology, workload, options);
  sim.run();
  auto r = judge_smoke(sim.log(), workload.total_jobs());
  if (r.pass) {
    if (auto mismatch = check_audit_completeness(sim); !mismatch.empty()) {
      r.pass = false;
      r.reason = "audit trail disagrees with live state: " + mismatch;
    }
  } else if (!sim.drained()) {
    r.reason = "timeout (" + r.reason + ")";
  }
  r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

std::vector<std::uint64_t> submit_workload(const ClientContext& ctx, const WorkloadSpec& workload) {
  std::vector<std::uint64_t> ids;
  const auto address = ctx.topology.frontend.address();
  const auto t0 = std::chrono::steady_clock::now();
  auto items = workload.items;
  std::stable_sort(items.begin(), items.end(),
                   [](const WorkloadItem& a, const WorkloadItem& b) { return a.submit_time < b.submit_time; });
  for (const auto& item : items) {
    std::this_thread::sleep_until(t0 + std::chrono::milliseconds(to_ms(item.submit_time)));
    for (std::int64_t i = 0; i < item.count; ++i) {
      nlohmann::json job = {{"owner", "user"},
                            {"requirements", item.requirements},
                            {"runtime_ms", to_ms(item.runtime)},
                            {"fail", item.fail}};
      auto reply = rpc(ctx.hosts, address,
                       Message::make(MsgType::JobSubmit, {{"job", job}, {"token", ctx.user_token.wire()}}),
                       *ctx.authority, std::chrono::seconds(5));
      if (!reply) throw LaunchError("job submission failed: " + reply.error());
      if (reply->type != MsgType::JobSubmitAck || !reply->payload.value("accepted", false))
        throw LaunchError("job submission rejected: " + reply->payload.dump());
      ids.push_back(reply->payload.at("job_id").get<std::uint64_t>());
    }
  }
  return ids;
}

namespace {

/// True once the pool reports every job terminal and the factory reports
/// only terminal glideins.
bool procs_drained(const ClientContext& ctx, std::size_t expected_jobs) {
  auto q = rpc(ctx.hosts, ctx.topology.frontend.address(), Message::make(MsgType::Query), *ctx.authority,
               std::chrono::seconds(2));
  if (!q || q->type != MsgType::QueryReply) return false;
  const auto& jobs = q->payload.at("jobs");
  if (jobs.size() < expected_jobs) return false;
  for (const auto& j : jobs) {
    const auto s = j.at("state").get<std::string>();
    if (s != "Completed" && s != "Failed" && s != "Removed") return false;
  }
  auto st = rpc(ctx.hosts, ctx.topology.factory.address(), Message::make(MsgType::StatusGet, {{"client_id", ""}}),
                *ctx.authority, std::chrono::seconds(2));
  if (!st || st->type != MsgType::StatusReply) return false;
  std::int64_t total = 0;
  for (const auto& s : st->payload.at("statuses")) {
    for (const auto& [client, counts] : s.get<FactoryStatusMessage>().counts)
      for (const auto& [state, n] : counts) {
        if (n > 0 && !is_terminal(state)) return false;
        total += n;
      }
  }
  return total > 0;
}

}  // namespace

SmokeReport smoke_test_procs(const std::filesystem::path& topology_path, const LaunchOptions& options,
                             std::chrono::seconds timeout) {
  const auto started = std::chrono::steady_clock::now();
  up(topology_path, options);
  bool finished = false;
  std::string failure;
  const auto workload = smoke_workload();
  try {
    auto ctx = client_context(options.state_dir);
    submit_workload(ctx, workload);
    const auto deadline = started + timeout;
    while (!finished && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::seconds(1));
      finished = procs_drained(ctx, static_cast<std::size_t>(workload.total_jobs()));
    }
  } catch (const std::exception& e) {
    failure = e.what();
  }
  auto log = down(options.state_dir);
  auto r = judge_smoke(log, workload.total_jobs());
  if (!failure.empty()) {
    r.pass = false;
    r.reason = failure;
  } else if (!finished) {
    r.pass = false;
    r.reason = "timeout (" + (r.reason.empty() ? std::string("not drained") : r.reason) + ")";
  }
  r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

}  // namespace glidemini
