#include <doctest.h>

#include <signal.h>
#include <sys/socket.h>
#include <netinet/in.h>
#include <unistd.h>

#include <fstream>
#include <set>

#include "glidemini/launcher.hpp"
#include "glidemini/process_host.hpp"
#include "support.hpp"

using namespace glidemini;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

std::uint16_t free_port_block(int n) {
  for (std::uint16_t base = static_cast<std::uint16_t>(21000 + (::getpid() % 2000) * 3); base < 60000; base += 7) {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) ok = port_free(static_cast<std::uint16_t>(base + i));
    if (ok) return base;
  }
  throw std::runtime_error("no free ports");
}

fs::path write_procs_topology(const fs::path& dir, std::uint16_t base) {
  std::ifstream in(fs::path(GLIDEMINI_SOURCE_DIR) / "config" / "minimal.json");
  auto doc = nlohmann::json::parse(in);
  doc["mode"] = "procs";
  doc["secret_dir"] = (dir / "secrets").string();
  doc["services"]["ce"]["port"] = base;
  doc["services"]["factory"]["port"] = base + 1;
  doc["services"]["frontend"]["port"] = base + 2;
  const auto path = dir / "topology.json";
  std::ofstream(path) << doc.dump(2);
  return path;
}

/// Holds a listening socket on 127.0.0.1:port.
struct PortSquatter {
  int fd = -1;
  explicit PortSquatter(std::uint16_t port) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(port);
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) == 0);
    REQUIRE(::listen(fd, 1) == 0);
  }
  ~PortSquatter() { ::close(fd); }
};

LaunchOptions options_in(const fs::path& dir) {
  LaunchOptions o;
  o.executable = GLIDEMINI_CLI;
  o.state_dir = dir / "state";
  o.log_dir = dir / "logs";
  return o;
}

}  // namespace

TEST_CASE("hosts table") {
  TempDir dir("hosts");
  HostsTable h;
  h.entries["ce.glideinwms.org"] = "127.0.0.1";
  h.write(dir.path() / "hosts");
  auto back = HostsTable::read(dir.path() / "hosts");
  CHECK(back.entries == h.entries);
  auto r = back.resolve("ce.glideinwms.org:9619");
  REQUIRE(r);
  CHECK(r->first == "127.0.0.1");
  CHECK(r->second == 9619);
  CHECK(back.resolve("10.0.0.5:80").value().first == "10.0.0.5");
  CHECK_FALSE(back.resolve("unknown.glideinwms.org:1"));
  CHECK_FALSE(back.resolve("no-port"));
}

TEST_CASE("secret dir precedence") {
  TopologyConfig t;
  t.secret_dir = "from-topology";
  ::unsetenv("GLIDEMINI_SECRET_DIR");
  CHECK(effective_secret_dir(t, std::nullopt) == "from-topology");
  ::setenv("GLIDEMINI_SECRET_DIR", "from-env", 1);
  CHECK(effective_secret_dir(t, std::nullopt) == "from-env");
  CHECK(effective_secret_dir(t, fs::path("explicit")) == "explicit");
  ::unsetenv("GLIDEMINI_SECRET_DIR");
}

TEST_CASE("up refuses an occupied port and names the service") {
  TempDir dir("busy");
  const auto base = free_port_block(3);
  const auto topo = write_procs_topology(dir.path(), base);
  PortSquatter squat(static_cast<std::uint16_t>(base + 1));
  try {
    up(topo, options_in(dir.path()));
    FAIL("expected LaunchError");
  } catch (const LaunchError& e) {
    const std::string what = e.what();
    CHECK(what.rfind("port-in-use", 0) == 0);
    CHECK(what.find("factory") != std::string::npos);
  }
  CHECK_FALSE(load_launch_state(dir.path() / "state").has_value());
}

TEST_CASE("up starts three healthy processes and down removes them") {
  TempDir dir("updown");
  const auto base = free_port_block(3);
  const auto topo = write_procs_topology(dir.path(), base);
  const auto opts = options_in(dir.path());
  auto state = up(topo, opts);
  REQUIRE(state.pids.size() == 3);
  for (const auto& [name, pid] : state.pids) CHECK(::kill(pid, 0) == 0);

  auto ctx = client_context(opts.state_dir);
  for (const auto& name : TopologyConfig::service_names()) {
    auto pong = rpc(ctx.hosts, ctx.topology.endpoint(name).address(), Message::make(MsgType::Ping), *ctx.authority,
                    std::chrono::seconds(2));
    REQUIRE(pong);
    CHECK(pong->type == MsgType::Pong);
    CHECK(pong->payload.at("service") == name);
  }
  // an unsigned message is refused
  {
    auto bogus = Message::make(MsgType::Query);
    auto other = Authority::from_seed(999);
    auto r = rpc(ctx.hosts, ctx.topology.frontend.address(), bogus, other, std::chrono::seconds(2));
    CHECK_FALSE(r);  // the reply is signed with a key the caller does not hold
  }
  std::vector<std::uint8_t> secret_before = ctx.authority->secret();

  auto log = down(opts.state_dir);
  for (const auto& [name, pid] : state.pids) CHECK(::kill(pid, 0) != 0);
  CHECK(fs::exists(state.secret_dir / Authority::kKeyFile));
  CHECK(Authority::init(state.secret_dir).secret() == secret_before);
  CHECK(fs::exists(opts.log_dir / "events.log"));
  for (const auto& name : TopologyConfig::service_names()) CHECK(fs::exists(opts.log_dir / (name + ".log")));
  std::set<std::string> kinds;
  for (const auto& e : log.entries()) kinds.insert(e.kind);
  CHECK(kinds.contains("start"));
  CHECK(kinds.contains("shutdown"));
  CHECK_FALSE(load_launch_state(opts.state_dir).has_value());
  CHECK_THROWS_AS(down(opts.state_dir), LaunchError);
}
