#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "glidemini/launcher.hpp"
#include "glidemini/simulation.hpp"
#include "glidemini/smoke.hpp"

using namespace glidemini;
namespace fs = std::filesystem;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kConfigError = 2;

/// Writes the merged log plus one file per service.
void write_logs(const EventLog& log, const fs::path& dir) {
  fs::create_directories(dir);
  log.write(dir / "events.log");
  std::map<std::string, std::ofstream> per_service;
  for (const auto& e : log.entries()) {
    auto it = per_service.find(e.service);
    if (it == per_service.end())
      it = per_service.emplace(e.service, std::ofstream(dir / (e.service + ".log"), std::ios::trunc)).first;
    it->second << e.line() << '\n';
  }
}

int print_status(const ClientContext& ctx) {
  nlohmann::json out = {{"pids", ctx.state.pids}};
  auto q = rpc(ctx.hosts, ctx.topology.frontend.address(), Message::make(MsgType::Query), *ctx.authority,
               std::chrono::seconds(2));
  if (q && q->type == MsgType::QueryReply) {
    std::map<std::string, int> by_state;
    for (const auto& j : q->payload.at("jobs")) ++by_state[j.at("state").get<std::string>()];
    out["jobs"] = by_state;
    out["pool"] = q->payload.at("snapshot");
  } else {
    out["frontend"] = q ? q->payload.dump() : q.error();
  }
  auto s = rpc(ctx.hosts, ctx.topology.factory.address(), Message::make(MsgType::StatusGet, {{"client_id", ""}}),
               *ctx.authority, std::chrono::seconds(2));
  if (s && s->type == MsgType::StatusReply) {
    out["factory"] = s->payload.at("statuses");
  } else {
    out["factory"] = s ? s->payload.dump() : s.error();
  }
  auto ce = rpc(ctx.hosts, ctx.topology.ce.address(), Message::make(MsgType::Ping), *ctx.authority,
                std::chrono::seconds(2));
  out["ce"] = ce && ce->type == MsgType::Pong ? "up" : "unreachable";
  std::cout << out.dump(2) << "\n";
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimal pilot-based workload management deployment"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  fs::path state_dir = ".glidemini";
  fs::path log_dir = "logs";
  std::string secret_dir;
  app.add_option("--state-dir", state_dir, "Where up() records the running processes");
  app.add_option("--log-dir", log_dir, "Directory for per-service logs and events.log");
  app.add_option("--secret-dir", secret_dir, "Overrides the topology's secret_dir and GLIDEMINI_SECRET_DIR");

  fs::path topology_path;
  fs::path workload_path;
  std::uint64_t seed = 42;
  double until_s = 7200;

  auto* up_cmd = app.add_subcommand("up", "Start ce, factory and frontend as processes");
  up_cmd->add_option("-f", topology_path, "Topology file")->required();
  up_cmd->add_option("--seed", seed);

  auto* down_cmd = app.add_subcommand("down", "Stop all processes and merge their logs");
  auto* status_cmd = app.add_subcommand("status", "Show jobs, pool and factory status");

  auto* submit_cmd = app.add_subcommand("submit", "Submit a workload to the running pool");
  submit_cmd->add_option("-f", workload_path, "Workload file")->required();

  auto* smoke_cmd = app.add_subcommand("smoke-test", "Run the built-in smoke workload end to end");
  smoke_cmd->add_option("-f", topology_path, "Topology file")->required();
  smoke_cmd->add_option("--seed", seed);
  std::optional<double> timeout_s;
  smoke_cmd->add_option("--timeout", timeout_s, "Wall seconds in procs mode (120), sim seconds in sim mode (600)");

  auto* sim_cmd = app.add_subcommand("sim", "Run topology and workload in the simulator");
  sim_cmd->add_option("-f", topology_path, "Topology file")->required();
  sim_cmd->add_option("-w", workload_path, "Workload file")->required();
  sim_cmd->add_option("--seed", seed);
  sim_cmd->add_option("--until", until_s, "Simulated seconds");

  std::string service;
  fs::path hosts_path;
  auto* serve_cmd = app.add_subcommand("serve", "Run one service (used by up)");
  serve_cmd->group("");
  serve_cmd->add_option("--service", service)->required();
  serve_cmd->add_option("-f", topology_path)->required();
  serve_cmd->add_option("--hosts", hosts_path)->required();
  serve_cmd->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfigError;
  }

  LaunchOptions launch;
  launch.state_dir = state_dir;
  launch.log_dir = log_dir;
  launch.seed = seed;
  if (!secret_dir.empty()) launch.secret_dir = fs::path(secret_dir);

  try {
    if (*serve_cmd) {
      const fs::path secrets = secret_dir.empty() ? effective_secret_dir(parse_topology_file(topology_path), {})
                                                  : fs::path(secret_dir);
      return serve(service, topology_path, hosts_path, secrets, log_dir, seed);
    }
    if (*up_cmd) {
      auto state = up(topology_path, launch);
      for (const auto& [name, pid] : state.pids) std::cout << name << " pid " << pid << " healthy\n";
      return kPass;
    }
    if (*down_cmd) {
      auto log = down(state_dir);
      auto r = judge_smoke(log, 0);
      std::cout << "stopped; " << log.size() << " entries merged into " << (log_dir / "events.log").string()
                << "\n" << r.metrics.to_json().dump(2) << "\n";
      return kPass;
    }
    if (*status_cmd) return print_status(client_context(state_dir));
    if (*submit_cmd) {
      const auto workload = parse_workload_file(workload_path);
      auto ids = submit_workload(client_context(state_dir), workload);
      std::cout << "submitted " << ids.size() << " jobs:";
      for (auto id : ids) std::cout << ' ' << id;
      std::cout << "\n";
      return kPass;
    }
    if (*smoke_cmd) {
      const auto topology = parse_topology_file(topology_path);
      SmokeReport r;
      if (topology.mode == RunMode::Sim) {
        SimOptions opts;
        opts.seed = seed;
        opts.until = at_ms(std::llround(timeout_s.value_or(600) * 1000));
        r = smoke_test_sim(topology, opts);
      } else {
        r = smoke_test_procs(topology_path, launch, std::chrono::seconds(static_cast<std::int64_t>(timeout_s.value_or(120))));
      }
      std::cout << r.to_json().dump(2) << "\n" << (r.pass ? "PASS" : "FAIL: " + r.reason) << "\n";
      return r.pass ? kPass : kFail;
    }
    if (*sim_cmd) {
      const auto topology = parse_topology_file(topology_path);
      const auto workload = parse_workload_file(workload_path);
      SimOptions opts;
      opts.seed = seed;
      opts.until = at_ms(std::llround(until_s * 1000));
      auto result = run_simulation(topology, workload, opts);
      write_logs(result.log, log_dir);
      auto verdict = judge_smoke(result.log, workload.total_jobs());
      std::cout << result.metrics.to_json().dump(2) << "\n"
                << "hash " << result.log.hash() << "\n"
                << "end " << to_ms(result.end_time) / 1000.0 << " s, drained " << (result.drained ? "yes" : "no")
                << "\n";
      if (!result.audit_mismatch.empty()) {
        std::cout << "FAIL: audit trail disagrees with live state: " << result.audit_mismatch << "\n";
        return kFail;
      }
      std::cout << (verdict.pass ? "PASS" : "FAIL: " + verdict.reason) << "\n";
      return verdict.pass ? kPass : kFail;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kFail;
}
