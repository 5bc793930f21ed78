#include "glidemini/topology.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

namespace glidemini {
namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += "; ";
    out += p;
  }
  return out;
}

/// Reads typed fields out of a JSON object, collecting problems with their
/// paths instead of stopping at the first one.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  void problem(const std::string& path, const std::string& msg) { problems_.push_back(path + ": " + msg); }

  const nlohmann::json* get(const nlohmann::json& obj, const std::string& path, const char* key, bool required) {
    if (!obj.is_object()) {
      problem(path, "expected an object");
      return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) problem(join_path(path, key), "missing");
      return nullptr;
    }
    return &*it;
  }

  std::string str(const nlohmann::json& obj, const std::string& path, const char* key, std::string def,
                  bool required = false) {
    auto* v = get(obj, path, key, required);
    if (!v) return def;
    if (!v->is_string()) {
      problem(join_path(path, key), "expected a string");
      return def;
    }
    return v->get<std::string>();
  }

  std::int64_t integer(const nlohmann::json& obj, const std::string& path, const char* key, std::int64_t def,
                       bool required = false) {
    auto* v = get(obj, path, key, required);
    if (!v) return def;
    if (!v->is_number_integer()) {
      problem(join_path(path, key), "expected an integer");
      return def;
    }
    return v->get<std::int64_t>();
  }

  double number(const nlohmann::json& obj, const std::string& path, const char* key, double def) {
    auto* v = get(obj, path, key, false);
    if (!v) return def;
    if (!v->is_number()) {
      problem(join_path(path, key), "expected a number");
      return def;
    }
    return v->get<double>();
  }

  Duration seconds(const nlohmann::json& obj, const std::string& path, const char* key, Duration def) {
    auto* v = get(obj, path, key, false);
    if (!v) return def;
    if (!v->is_number() || v->get<double>() < 0) {
      problem(join_path(path, key), "expected a non-negative number of seconds");
      return def;
    }
    return seconds_to_duration(v->get<double>());
  }

  bool boolean(const nlohmann::json& obj, const std::string& path, const char* key, bool def) {
    auto* v = get(obj, path, key, false);
    if (!v) return def;
    if (!v->is_boolean()) {
      problem(join_path(path, key), "expected true or false");
      return def;
    }
    return v->get<bool>();
  }

  ResourceSpec resources(const nlohmann::json& v, const std::string& path) {
    try {
      return v.get<ResourceSpec>();
    } catch (const std::exception& e) {
      problem(path, e.what());
      return {};
    }
  }

  static std::string join_path(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  std::vector<std::string>& problems_;
};

ServiceEndpoint read_endpoint(Reader& r, const nlohmann::json& svc, const std::string& path) {
  ServiceEndpoint ep;
  ep.hostname = r.str(svc, path, "hostname", "", true);
  const auto port = r.integer(svc, path, "port", 0, true);
  if (svc.is_object() && svc.contains("port") && (port < 1 || port > 65535))
    r.problem(path + ".port", "must be within 1..65535");
  ep.port = static_cast<std::uint16_t>(std::clamp<std::int64_t>(port, 0, 65535));
  return ep;
}

void read_ce(Reader& r, const nlohmann::json& svc, TopologyConfig& t) {
  const std::string path = "services.ce";
  auto& c = t.ce_config;
  c.audience = t.ce.hostname;
  c.cycle_period = r.seconds(svc, path, "cycle_period_s", secs(1));
  c.startup_delay = r.seconds(svc, path, "startup_delay_s", secs(3));
  c.validation_failure_prob = r.number(svc, path, "validation_failure_prob", 0.0);

  if (auto* nodes = r.get(svc, path, "nodes", true)) {
    if (!nodes->is_array() || nodes->empty()) {
      r.problem(path + ".nodes", "expected a non-empty list");
    } else {
      for (std::size_t i = 0; i < nodes->size(); ++i) {
        const auto np = path + ".nodes[" + std::to_string(i) + "]";
        const auto& n = (*nodes)[i];
        NodeDescriptor d;
        d.node_id = r.str(n, np, "node_id", "node-" + std::to_string(i));
        if (auto* a = r.get(n, np, "actual", true)) d.actual = r.resources(*a, np + ".actual");
        d.advertised = d.actual;
        if (auto* a = r.get(n, np, "advertised", false)) d.advertised = r.resources(*a, np + ".advertised");
        c.nodes.push_back(std::move(d));
      }
    }
  }
  if (auto* g = r.get(svc, path, "glidein", false)) {
    const auto gp = path + ".glidein";
    c.glidein.max_lifetime = r.seconds(*g, gp, "max_lifetime_s", c.glidein.max_lifetime);
    c.glidein.idle_timeout = r.seconds(*g, gp, "idle_timeout_s", c.glidein.idle_timeout);
    c.glidein.poll_period = r.seconds(*g, gp, "poll_period_s", c.glidein.poll_period);
    c.glidein.max_registration_failures =
        static_cast<int>(r.integer(*g, gp, "max_registration_failures", c.glidein.max_registration_failures));
  }
  try {
    if (!c.nodes.empty()) c.validate();
  } catch (const std::invalid_argument& e) {
    r.problem(path, e.what());
  }
}

void read_factory(Reader& r, const nlohmann::json& svc, TopologyConfig& t, const std::string& client_id) {
  const std::string path = "services.factory";
  auto& f = t.factory_config;
  f.audience = t.factory.hostname;
  f.cycle_period = r.seconds(svc, path, "cycle_period_s", secs(2));
  f.request_ttl = r.seconds(svc, path, "request_ttl_s", secs(60));

  auto read_entry = [&](const nlohmann::json& e, const std::string& ep) {
    EntryDescriptor d;
    d.entry_id = r.str(e, ep, "entry_id", "ce-entry");
    d.ce_address = r.str(e, ep, "ce_address", t.ce.address());
    d.audience = r.str(e, ep, "audience", t.ce.hostname);
    d.max_pressure = r.integer(e, ep, "max_pressure", 8);
    d.max_submit_per_cycle = r.integer(e, ep, "max_submit_per_cycle", 4);
    if (auto* tc = r.get(e, ep, "trusted_clients", false)) {
      if (!tc->is_array()) {
        r.problem(ep + ".trusted_clients", "expected a list of client ids");
      } else {
        for (const auto& c : *tc) {
          if (c.is_string()) d.trusted_clients.push_back(c.get<std::string>());
          else r.problem(ep + ".trusted_clients", "expected strings");
        }
      }
    } else {
      d.trusted_clients = {client_id};
    }
    try {
      d.validate();
    } catch (const std::invalid_argument& ex) {
      r.problem(ep, ex.what());
    }
    f.entries.push_back(std::move(d));
  };

  if (auto* entries = r.get(svc, path, "entries", false)) {
    if (!entries->is_array() || entries->empty()) {
      r.problem(path + ".entries", "expected a non-empty list");
    } else {
      for (std::size_t i = 0; i < entries->size(); ++i)
        read_entry((*entries)[i], path + ".entries[" + std::to_string(i) + "]");
    }
  } else {
    read_entry(svc, path);  // single-entry shorthand: limits sit on the factory block
  }
  std::set<std::string> ids;
  for (const auto& e : f.entries)
    if (!ids.insert(e.entry_id).second) r.problem(path + ".entries", "duplicate entry_id " + e.entry_id);
}

void read_frontend(Reader& r, const nlohmann::json& svc, TopologyConfig& t) {
  const std::string path = "services.frontend";
  auto& f = t.frontend_config;
  f.cycle_period = r.seconds(svc, path, "cycle_period_s", secs(2));
  f.max_pressure_per_entry = r.integer(svc, path, "max_pressure_per_entry", 8);
  f.total_max_glideins = r.integer(svc, path, "total_max_glideins", 100);
  f.total_curb_glideins = r.integer(svc, path, "total_curb_glideins", 50);
  f.credential_ttl = r.seconds(svc, path, "credential_ttl_s", secs(24 * 3600));
  if (auto* e = r.get(svc, path, "expansion_factor", false)) {
    try {
      f.expansion_factor = Rational::parse(*e);
    } catch (const std::exception& ex) {
      r.problem(path + ".expansion_factor", ex.what());
    }
  }

  ResourceSpec default_node;
  if (!t.ce_config.nodes.empty()) {
    auto first = std::min_element(t.ce_config.nodes.begin(), t.ce_config.nodes.end(),
                                  [](const auto& a, const auto& b) { return a.node_id < b.node_id; });
    default_node = first->advertised;
  }
  std::map<std::string, ResourceSpec> overrides;
  if (auto* entries = r.get(svc, path, "entries", false)) {
    if (!entries->is_array()) {
      r.problem(path + ".entries", "expected a list");
    } else {
      for (std::size_t i = 0; i < entries->size(); ++i) {
        const auto ep = path + ".entries[" + std::to_string(i) + "]";
        const auto& e = (*entries)[i];
        auto id = r.str(e, ep, "entry_id", "", true);
        auto spec = default_node;
        if (auto* n = r.get(e, ep, "node_advertised", false)) spec = r.resources(*n, ep + ".node_advertised");
        bool known = std::any_of(t.factory_config.entries.begin(), t.factory_config.entries.end(),
                                 [&](const auto& fe) { return fe.entry_id == id; });
        if (!known && !id.empty()) r.problem(ep + ".entry_id", "no factory entry named " + id);
        overrides[id] = spec;
      }
    }
  }
  for (const auto& fe : t.factory_config.entries) {
    if (auto* entries = r.get(svc, path, "entries", false); entries && !overrides.contains(fe.entry_id)) continue;
    auto it = overrides.find(fe.entry_id);
    f.entries.push_back({fe.entry_id, it == overrides.end() ? default_node : it->second, t.factory.address()});
  }

  t.pool_config.audience = t.frontend.hostname;
  if (auto* p = r.get(svc, path, "pool", false)) {
    t.pool_config.negotiation_period = r.seconds(*p, path + ".pool", "negotiation_period_s", secs(2));
    t.pool_config.ad_lifetime = r.seconds(*p, path + ".pool", "ad_lifetime_s", secs(10));
  }
  if (t.pool_config.negotiation_period <= Duration::zero())
    r.problem(path + ".pool.negotiation_period_s", "must be positive");
  if (t.pool_config.ad_lifetime <= Duration::zero()) r.problem(path + ".pool.ad_lifetime_s", "must be positive");
  try {
    f.validate();
  } catch (const std::invalid_argument& e) {
    r.problem(path, e.what());
  }
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

const std::vector<std::string>& TopologyConfig::service_names() {
  static const std::vector<std::string> names{"ce", "factory", "frontend"};
  return names;
}

const ServiceEndpoint& TopologyConfig::endpoint(const std::string& service) const {
  if (service == "ce") return ce;
  if (service == "factory") return factory;
  if (service == "frontend") return frontend;
  throw std::out_of_range("unknown service " + service);
}

TopologyConfig parse_topology(const nlohmann::json& doc) {
  std::vector<std::string> problems;
  Reader r(problems);
  TopologyConfig t;
  t.source = doc;
  if (!doc.is_object()) throw ConfigError({"(root): expected an object"});

  t.domain = r.str(doc, "", "domain", t.domain);
  const auto mode = r.str(doc, "", "mode", "sim");
  if (mode == "sim") t.mode = RunMode::Sim;
  else if (mode == "procs") t.mode = RunMode::Procs;
  else r.problem("mode", "must be sim or procs, got " + mode);
  t.secret_dir = r.str(doc, "", "secret_dir", t.secret_dir.string());

  const auto* services = r.get(doc, "", "services", true);
  if (!services) throw ConfigError(problems);
  if (!services->is_object()) {
    r.problem("services", "expected an object");
    throw ConfigError(problems);
  }
  for (const auto& [name, v] : services->items())
    if (std::find(t.service_names().begin(), t.service_names().end(), name) == t.service_names().end())
      r.problem("services." + name, "unknown service (expected exactly ce, factory, frontend)");
  for (const auto& name : t.service_names())
    if (!services->contains(name)) r.problem("services." + name, "missing service");
  if (!problems.empty()) throw ConfigError(problems);

  const auto& ce = (*services)["ce"];
  const auto& factory = (*services)["factory"];
  const auto& frontend = (*services)["frontend"];
  t.ce = read_endpoint(r, ce, "services.ce");
  t.factory = read_endpoint(r, factory, "services.factory");
  t.frontend = read_endpoint(r, frontend, "services.frontend");

  std::map<std::string, std::string> hosts;
  std::map<std::uint16_t, std::string> ports;
  for (const auto& name : t.service_names()) {
    const auto& ep = t.endpoint(name);
    const auto path = "services." + name;
    if (!ep.hostname.empty() && !ends_with(ep.hostname, "." + t.domain))
      r.problem(path + ".hostname", ep.hostname + " is outside the domain " + t.domain);
    if (auto [it, fresh] = hosts.emplace(ep.hostname, path); !fresh && !ep.hostname.empty())
      r.problem(path + ".hostname", "duplicates " + it->second + ".hostname (" + ep.hostname + ")");
    if (auto [it, fresh] = ports.emplace(ep.port, path); !fresh && ep.port != 0)
      r.problem(path + ".port", "duplicates " + it->second + ".port (" + std::to_string(ep.port) + ")");
  }

  t.frontend_config.client_id = r.str(frontend, "services.frontend", "client_id", "frontend");
  read_ce(r, ce, t);
  read_factory(r, factory, t, t.frontend_config.client_id);
  read_frontend(r, frontend, t);

  if (!problems.empty()) throw ConfigError(problems);
  return t;
}

TopologyConfig parse_topology_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open"});
  try {
    return parse_topology(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
}

std::int64_t WorkloadSpec::total_jobs() const {
  std::int64_t n = 0;
  for (const auto& i : items) n += i.count;
  return n;
}

WorkloadSpec parse_workload(const nlohmann::json& doc) {
  std::vector<std::string> problems;
  Reader r(problems);
  WorkloadSpec w;
  const nlohmann::json* jobs = doc.is_array() ? &doc : r.get(doc, "", "jobs", true);
  if (!jobs) throw ConfigError(problems);
  if (!jobs->is_array()) throw ConfigError({"jobs: expected a list"});
  for (std::size_t i = 0; i < jobs->size(); ++i) {
    const auto p = "jobs[" + std::to_string(i) + "]";
    const auto& j = (*jobs)[i];
    WorkloadItem item;
    const double at = r.number(j, p, "submit_time_s", 0.0);
    if (at < 0) r.problem(p + ".submit_time_s", "must be >= 0");
    item.submit_time = SimTime{seconds_to_duration(std::max(at, 0.0))};
    item.count = r.integer(j, p, "count", 1);
    if (item.count < 1) r.problem(p + ".count", "must be >= 1");
    if (auto* req = r.get(j, p, "requirements", true)) item.requirements = r.resources(*req, p + ".requirements");
    if (!r.get(j, p, "runtime_s", true)) continue;
    item.runtime = r.seconds(j, p, "runtime_s", Duration::zero());
    if (item.runtime <= Duration::zero()) r.problem(p + ".runtime_s", "must be positive");
    item.fail = r.boolean(j, p, "fail", false);
    w.items.push_back(item);
  }
  if (!problems.empty()) throw ConfigError(problems);
  return w;
}

WorkloadSpec parse_workload_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open"});
  try {
    return parse_workload(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
}

nlohmann::json to_json(const WorkloadSpec& w) {
  nlohmann::json jobs = nlohmann::json::array();
  for (const auto& i : w.items)
    jobs.push_back({{"submit_time_s", to_seconds(i.submit_time.time_since_epoch())},
                    {"count", i.count},
                    {"requirements", i.requirements},
                    {"runtime_s", to_seconds(i.runtime)},
                    {"fail", i.fail}});
  return {{"jobs", jobs}};
}

WorkloadSpec smoke_workload() {
  WorkloadSpec w;
  w.items.push_back({at_ms(0), 10, ResourceSpec{1, 1024, 0, 0}, secs(10), false});
  return w;
}

}  // namespace glidemini
