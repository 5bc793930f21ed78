#include "glidemini/launcher.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "glidemini/services.hpp"
#include "glidemini/simulation.hpp"

namespace glidemini {
namespace fs = std::filesystem;

namespace {

constexpr const char* kStateFile = "launch.json";
constexpr const char* kHostsFile = "hosts";

void write_private(const fs::path& path, const std::string& content) {
  {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw LaunchError("cannot write " + path.string());
    out << content << '\n';
  }
  fs::permissions(path, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
}

Token read_token(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LaunchError("cannot read credential " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto text = ss.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  auto t = Token::from_wire(text);
  if (!t) throw LaunchError("credential file " + path.string() + " does not hold a token");
  return *t;
}

bool process_gone(int pid) {
  int status = 0;
  const int r = ::waitpid(pid, &status, WNOHANG);
  if (r == pid) return true;
  return ::kill(pid, 0) != 0 && errno == ESRCH;
}

void terminate_all(const std::map<std::string, int>& pids) {
  for (const auto& [name, pid] : pids) ::kill(pid, SIGTERM);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  for (const auto& [name, pid] : pids) {
    while (!process_gone(pid) && std::chrono::steady_clock::now() < deadline)
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    if (!process_gone(pid)) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
    }
  }
}

int spawn(const fs::path& exe, const std::vector<std::string>& args, const fs::path& stderr_path) {
  std::vector<char*> argv;
  argv.push_back(const_cast<char*>(exe.c_str()));
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw LaunchError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::setsid();
    const int fd = ::open(stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      ::dup2(fd, STDOUT_FILENO);
      ::dup2(fd, STDERR_FILENO);
      ::close(fd);
    }
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::execv(exe.c_str(), argv.data());
    std::perror("execv");
    ::_exit(127);
  }
  return pid;
}

}  // namespace

nlohmann::json LaunchState::to_json() const {
  return {{"topology", topology.string()},
          {"secret_dir", secret_dir.string()},
          {"log_dir", log_dir.string()},
          {"hosts", hosts.string()},
          {"pids", pids}};
}

LaunchState LaunchState::from_json(const nlohmann::json& j) {
  LaunchState s;
  s.topology = j.at("topology").get<std::string>();
  s.secret_dir = j.at("secret_dir").get<std::string>();
  s.log_dir = j.at("log_dir").get<std::string>();
  s.hosts = j.at("hosts").get<std::string>();
  s.pids = j.at("pids").get<std::map<std::string, int>>();
  return s;
}

fs::path effective_secret_dir(const TopologyConfig& topology, const std::optional<fs::path>& override_dir) {
  if (override_dir) return *override_dir;
  if (const char* env = std::getenv("GLIDEMINI_SECRET_DIR"); env && *env) return env;
  return topology.secret_dir;
}

std::optional<LaunchState> load_launch_state(const fs::path& state_dir) {
  std::ifstream in(state_dir / kStateFile);
  if (!in) return std::nullopt;
  return LaunchState::from_json(nlohmann::json::parse(in));
}

LaunchState up(const fs::path& topology_path, const LaunchOptions& options) {
  const auto topology = parse_topology_file(topology_path);
  if (topology.mode != RunMode::Procs) throw LaunchError("up needs a topology with mode \"procs\"");

  if (auto existing = load_launch_state(options.state_dir)) {
    for (const auto& [name, pid] : existing->pids)
      if (!process_gone(pid)) throw LaunchError("already up: " + name + " is running as pid " + std::to_string(pid));
  }
  for (const auto& name : TopologyConfig::service_names()) {
    const auto& ep = topology.endpoint(name);
    if (!port_free(ep.port))
      throw LaunchError("port-in-use: service " + name + " cannot bind port " + std::to_string(ep.port));
  }

  LaunchState state;
  state.topology = fs::absolute(topology_path);
  state.secret_dir = fs::absolute(effective_secret_dir(topology, options.secret_dir));
  state.log_dir = fs::absolute(options.log_dir);
  fs::create_directories(options.state_dir);
  fs::create_directories(state.log_dir);
  state.hosts = fs::absolute(options.state_dir / kHostsFile);

  std::shared_ptr<Authority> authority;
  try {
    authority = std::make_shared<Authority>(Authority::init(state.secret_dir));
  } catch (const AuthorityError& e) {
    throw LaunchError(e.what());
  }
  const auto creds = issue_credentials(*authority, topology, wall_now(), topology.frontend_config.credential_ttl);
  write_private(state.secret_dir / kComputeTokenFile, creds.compute.wire());
  write_private(state.secret_dir / kMailboxTokenFile, creds.mailbox.wire());
  write_private(state.secret_dir / kUserTokenFile, creds.user.wire());

  HostsTable hosts;
  for (const auto& name : TopologyConfig::service_names()) hosts.entries[topology.endpoint(name).hostname] = "127.0.0.1";
  hosts.write(state.hosts);

  for (const auto& name : TopologyConfig::service_names()) {
    fs::remove(state.log_dir / (name + ".log"));
    const std::vector<std::string> args{"serve",        "--service",   name,
                                        "-f",           state.topology.string(),
                                        "--hosts",      state.hosts.string(),
                                        "--secret-dir", state.secret_dir.string(),
                                        "--log-dir",    state.log_dir.string(),
                                        "--seed",       std::to_string(options.seed)};
    state.pids[name] = spawn(options.executable, args, state.log_dir / (name + ".stderr"));
  }

  for (const auto& name : TopologyConfig::service_names()) {
    const auto deadline = std::chrono::steady_clock::now() + options.health_timeout;
    bool healthy = false;
    while (!healthy && std::chrono::steady_clock::now() < deadline) {
      if (process_gone(state.pids[name])) break;
      auto r = rpc(hosts, topology.endpoint(name).address(), Message::make(MsgType::Ping), *authority,
                   std::chrono::milliseconds(500));
      healthy = r && r->type == MsgType::Pong && r->payload.value("service", "") == name;
      if (!healthy) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    if (!healthy) {
      terminate_all(state.pids);
      std::string detail;
      std::ifstream err(state.log_dir / (name + ".stderr"));
      std::getline(err, detail);
      throw LaunchError("health check failed: " + name + (detail.empty() ? "" : " (" + detail + ")"));
    }
  }

  std::ofstream out(options.state_dir / kStateFile, std::ios::trunc);
  out << state.to_json().dump(2) << '\n';
  return state;
}

EventLog down(const fs::path& state_dir) {
  auto state = load_launch_state(state_dir);
  if (!state) throw LaunchError("nothing is up (no " + (state_dir / kStateFile).string() + ")");
  terminate_all(state->pids);
  std::vector<EventLog> logs;
  for (const auto& name : TopologyConfig::service_names()) {
    const auto path = state->log_dir / (name + ".log");
    if (fs::exists(path)) logs.push_back(EventLog::read(path));
  }
  auto merged = EventLog::merge(logs);
  merged.write(state->log_dir / "events.log");
  fs::remove(state_dir / kStateFile);
  return merged;
}

ClientContext client_context(const fs::path& state_dir) {
  auto state = load_launch_state(state_dir);
  if (!state) throw LaunchError("nothing is up (no " + (state_dir / kStateFile).string() + ")");
  ClientContext c{*state, parse_topology_file(state->topology), HostsTable::read(state->hosts), nullptr, {}};
  try {
    c.authority = std::make_shared<Authority>(Authority::init(state->secret_dir));
  } catch (const AuthorityError& e) {
    throw LaunchError(e.what());
  }
  c.user_token = read_token(state->secret_dir / kUserTokenFile);
  return c;
}

int serve(const std::string& service, const fs::path& topology_path, const fs::path& hosts_path,
          const fs::path& secret_dir, const fs::path& log_dir, std::uint64_t seed) {
  try {
    const auto topology = parse_topology_file(topology_path);
    auto authority = std::make_shared<Authority>(Authority::init(secret_dir));
    auto hosts = HostsTable::read(hosts_path);
    std::unique_ptr<Service> svc;
    if (service == "ce") {
      svc = std::make_unique<CeService>(topology.ce.address(), topology.ce_config, authority,
                                        topology.frontend.address());
    } else if (service == "factory") {
      svc = std::make_unique<FactoryService>(topology.factory.address(), topology.factory_config, authority);
    } else if (service == "frontend") {
      auto cfg = topology.frontend_config;
      cfg.credential = read_token(secret_dir / kComputeTokenFile);
      cfg.mailbox_token = read_token(secret_dir / kMailboxTokenFile);
      svc = std::make_unique<FrontendService>(topology.frontend.address(), std::move(cfg), topology.pool_config,
                                              authority, topology.factory.address());
    } else {
      std::cerr << "unknown service " << service << "\n";
      return 2;
    }
    ProcessHost host(*svc, authority, std::move(hosts), log_dir / (service + ".log"), seed);
    host.run();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}

}  // namespace glidemini
