#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "glidemini/ce.hpp"
#include "glidemini/factory.hpp"
#include "glidemini/frontend.hpp"
#include "glidemini/userpool.hpp"

namespace glidemini {

/// Parse or validation failure. what() lists every problem as
/// "<field path>: <message>", separated by "; ".
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class RunMode { Sim, Procs };

struct ServiceEndpoint {
  std::string hostname;
  std::uint16_t port = 0;
  std::string address() const { return hostname + ":" + std::to_string(port); }
};

/// The three-host minimal deployment: a CE, a factory (which hosts the
/// mailbox), and a frontend (which hosts the user pool).
struct TopologyConfig {
  std::string domain = "glideinwms.org";
  RunMode mode = RunMode::Sim;
  std::filesystem::path secret_dir = "secrets";
  ServiceEndpoint ce;
  ServiceEndpoint factory;
  ServiceEndpoint frontend;
  CeConfig ce_config;
  FactoryConfig factory_config;
  FrontendConfig frontend_config;  // credentials are filled in at launch
  PoolConfig pool_config;
  nlohmann::json source;  // the document as read

  const ServiceEndpoint& endpoint(const std::string& service) const;
  static const std::vector<std::string>& service_names();  // {"ce", "factory", "frontend"}
};

TopologyConfig parse_topology(const nlohmann::json& doc);
/// Throws ConfigError (with "file" as the path) if the file is missing or
/// not JSON.
TopologyConfig parse_topology_file(const std::filesystem::path& path);

struct WorkloadItem {
  SimTime submit_time{};
  std::int64_t count = 1;
  ResourceSpec requirements;
  Duration runtime{};
  bool fail = false;
};

struct WorkloadSpec {
  std::vector<WorkloadItem> items;
  std::int64_t total_jobs() const;
};

WorkloadSpec parse_workload(const nlohmann::json& doc);
WorkloadSpec parse_workload_file(const std::filesystem::path& path);
nlohmann::json to_json(const WorkloadSpec& w);

/// Ten 1-core, 1024 MB, 10 s jobs at t=0.
WorkloadSpec smoke_workload();

}  // namespace glidemini
