#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "glidemini/expected.hpp"
#include "glidemini/message.hpp"
#include "glidemini/services.hpp"

namespace glidemini {

/// Virtual name resolution: hostname -> IP literal. File format is one
/// "<ip> <hostname>" pair per line, like /etc/hosts.
struct HostsTable {
  std::map<std::string, std::string> entries;

  /// Resolves "hostname:port" to (ip, port); plain IP literals pass through.
  Expected<std::pair<std::string, std::uint16_t>, std::string> resolve(const std::string& address) const;

  void write(const std::filesystem::path& path) const;
  static HostsTable read(const std::filesystem::path& path);
};

SimTime wall_now();

/// Runs one service on its own event loop, speaking the line protocol on
/// `listen_port`. Blocks until SIGTERM/SIGINT or stop().
class ProcessHost {
 public:
  ProcessHost(Service& service, std::shared_ptr<Authority> authority, HostsTable hosts,
              std::filesystem::path log_path, std::uint64_t seed = 42);
  ~ProcessHost();

  /// Throws std::runtime_error (mentioning port-in-use) if the port cannot
  /// be bound.
  void run();
  void stop();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

/// One blocking request/response exchange, for the CLI and tests.
Expected<Message, std::string> rpc(const HostsTable& hosts, const std::string& address, Message msg,
                                   const Authority& authority, std::chrono::milliseconds timeout);

/// True if a TCP listener could be bound on 127.0.0.1:port right now.
bool port_free(std::uint16_t port);

}  // namespace glidemini
