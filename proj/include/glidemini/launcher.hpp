#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "glidemini/event_log.hpp"
#include "glidemini/process_host.hpp"
#include "glidemini/topology.hpp"

namespace glidemini {

class LaunchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Credential files written into the secret directory by up().
inline constexpr const char* kComputeTokenFile = "frontend-compute.token";
inline constexpr const char* kMailboxTokenFile = "frontend-mailbox.token";
inline constexpr const char* kUserTokenFile = "user-submit.token";

struct LaunchOptions {
  std::filesystem::path executable = "/proc/self/exe";  // binary that implements `serve`
  std::filesystem::path state_dir = ".glidemini";
  std::filesystem::path log_dir = "logs";
  std::optional<std::filesystem::path> secret_dir;  // overrides the topology's
  std::chrono::milliseconds health_timeout{10'000};
  std::uint64_t seed = 42;
};

/// What up() leaves behind so that later commands can find the processes.
struct LaunchState {
  std::filesystem::path topology;
  std::filesystem::path secret_dir;
  std::filesystem::path log_dir;
  std::filesystem::path hosts;
  std::map<std::string, int> pids;

  nlohmann::json to_json() const;
  static LaunchState from_json(const nlohmann::json& j);
};

/// Secret directory after applying the override and GLIDEMINI_SECRET_DIR.
std::filesystem::path effective_secret_dir(const TopologyConfig& topology,
                                           const std::optional<std::filesystem::path>& override_dir);

/// Initializes the authority, writes credentials and the hosts table, starts
/// ce, factory and frontend as separate processes and waits for each PONG.
/// Throws LaunchError ("port-in-use: ..." or "health check failed: ...").
LaunchState up(const std::filesystem::path& topology_path, const LaunchOptions& options);

/// Stops every process of the launch, merges the service logs into
/// events.log, and returns the merged log. The secret directory is kept.
EventLog down(const std::filesystem::path& state_dir);

std::optional<LaunchState> load_launch_state(const std::filesystem::path& state_dir);

/// Entry point of a service process.
int serve(const std::string& service, const std::filesystem::path& topology_path,
          const std::filesystem::path& hosts_path, const std::filesystem::path& secret_dir,
          const std::filesystem::path& log_dir, std::uint64_t seed);

/// Authority and table needed to talk to a launched deployment.
struct ClientContext {
  LaunchState state;
  TopologyConfig topology;
  HostsTable hosts;
  std::shared_ptr<Authority> authority;
  Token user_token;
};
ClientContext client_context(const std::filesystem::path& state_dir);

}  // namespace glidemini
