// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria (0 when all pass).

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "glidemini/ce.hpp"
#include "glidemini/credentials.hpp"
#include "glidemini/launcher.hpp"
#include "glidemini/mailbox.hpp"
#include "glidemini/metrics.hpp"
#include "glidemini/process_host.hpp"
#include "glidemini/simulation.hpp"
#include "glidemini/smoke.hpp"
#include "glidemini/topology.hpp"
#include "glidemini/userpool.hpp"
#include "matching_oracle.hpp"

using namespace glidemini;
namespace fs = std::filesystem;

namespace {

// ---- tolerances -----------------------------------------------------------

constexpr double kSmokeMakespanBound_s = 40.0;
constexpr double kSmokeWallBound_s = 5.0;
constexpr double kScheduleSlack_s = 0.05;  // actual vs hand-built schedule
constexpr std::int64_t kParallelSlots = 16;  // 2 whole-node pilots x 8 cores
constexpr std::int64_t kNoWasteBound_ms = 30'000 + 2'000;  // idle timeout + poll period
constexpr int kFuzzScenarios = 200;
constexpr double kProcsWallBound_s = 120.0;

// ---- plumbing -------------------------------------------------------------

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      if (failures_.tellp() > 0) failures_ << "; ";
      failures_ << what;
    }
  }
  void note(const std::string& s) {
    if (notes_.tellp() > 0) notes_ << ", ";
    notes_ << s;
  }
  Outcome outcome() const {
    return {pass_, pass_ ? notes_.str() : failures_.str() + (notes_.str().empty() ? "" : " | " + notes_.str())};
  }

 private:
  bool pass_ = true;
  std::ostringstream failures_, notes_;
};

template <class T>
std::string str(const T& v) {
  std::ostringstream o;
  o << v;
  return o.str();
}

const fs::path kSourceDir = GLIDEMINI_SOURCE_DIR;

nlohmann::json minimal_doc() {
  std::ifstream in(kSourceDir / "config" / "minimal.json");
  return nlohmann::json::parse(in);
}

/// Logs collected for the exactly-once check, tagged by origin.
std::vector<std::pair<std::string, EventLog>> g_logs;

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool in_pressure_set(GlideinState s) {
  return s == GlideinState::Submitted || s == GlideinState::Queued || s == GlideinState::Starting ||
         s == GlideinState::Registered || s == GlideinState::Running;
}

/// Counted from the factory's records, not from Factory::pressure.
std::int64_t count_pressure(const Factory& f, const std::string& entry) {
  std::int64_t n = 0;
  for (const auto& [id, g] : f.glideins())
    if (g.entry_id == entry && in_pressure_set(g.state)) ++n;
  return n;
}

/// Audit records straight from the log JSON.
struct RawAudit {
  std::int64_t t;
  std::string subject;
  std::string action;
  nlohmann::json detail;
};
std::vector<RawAudit> raw_audit(const EventLog& log) {
  std::vector<RawAudit> out;
  for (const auto& e : log.entries())
    if (e.kind == "audit")
      out.push_back({to_ms(e.time), e.payload.at("subject").get<std::string>(),
                     e.payload.at("action").get<std::string>(), e.payload.value("detail", nlohmann::json::object())});
  return out;
}

// ---- 1. end-to-end smoke (sim) --------------------------------------------

/// Hand-built schedule for the minimal deployment: every hop is one message
/// latency, every control loop acts on its next tick.
double reference_smoke_makespan_s(const TopologyConfig& t, const WorkloadSpec& w) {
  const std::int64_t lat = 10;
  auto next_tick = [](std::int64_t t_ms, std::int64_t period) { return (t_ms + period - 1) / period * period; };
  const std::int64_t fac = to_ms(t.factory_config.cycle_period);
  const std::int64_t ce = to_ms(t.ce_config.cycle_period);
  const std::int64_t neg = to_ms(t.pool_config.negotiation_period);

  // frontend tick at 0: status get (2 hops) and request put (2 hops)
  const std::int64_t request_stored = 4 * lat;
  const std::int64_t factory_submits = next_tick(request_stored + 1, fac);
  const std::int64_t ce_assigns = next_tick(factory_submits + lat, ce);
  const std::int64_t pilot_validated = ce_assigns + to_ms(t.ce_config.startup_delay);
  const std::int64_t pool_has_ad = pilot_validated + 2 * lat;  // register + confirm
  const std::int64_t first_match = next_tick(pool_has_ad, neg);

  std::int64_t slots = 0;
  for (const auto& n : t.ce_config.nodes) slots += n.advertised.cores;
  const std::int64_t jobs = w.total_jobs();
  const std::int64_t rounds = (jobs + slots - 1) / slots;
  const std::int64_t runtime = to_ms(w.items.front().runtime);
  // claim delivered one hop after the match; later rounds start as slots free
  const std::int64_t last_end = first_match + lat + rounds * runtime + (rounds - 1) * (neg + lat);
  return static_cast<double>(last_end) / 1000.0;
}

SimResult g_smoke;  // criterion 1's run, reused by 6

Outcome criterion_1() {
  Check c;
  const auto t = parse_topology(minimal_doc());
  const auto w = parse_workload_file(kSourceDir / "config" / "smoke_workload.json");
  const auto t0 = std::chrono::steady_clock::now();
  g_smoke = run_simulation(t, w, {});
  const double wall = wall_since(t0);
  g_logs.emplace_back("smoke", g_smoke.log);
  const auto& m = g_smoke.metrics;
  const double ref = reference_smoke_makespan_s(t, w);

  c.require(w.total_jobs() == 10, "workload is not 10 jobs");
  c.require(g_smoke.drained, "did not drain");
  c.require(m.jobs_completed == 10, "completed " + str(m.jobs_completed) + "/10");
  c.require(m.peak_running_glideins == 2, "peak running glideins " + str(m.peak_running_glideins) + " != 2");
  c.require(m.peak_running_jobs <= kParallelSlots, "peak running jobs " + str(m.peak_running_jobs) + " > 16");
  c.require(m.makespan_s <= kSmokeMakespanBound_s, "makespan " + str(m.makespan_s) + " > 40");
  c.require(ref <= kSmokeMakespanBound_s, "reference schedule " + str(ref) + " > 40");
  c.require(std::abs(m.makespan_s - ref) <= kScheduleSlack_s,
            "makespan " + str(m.makespan_s) + " differs from reference " + str(ref));
  c.require(wall < kSmokeWallBound_s, "wall " + str(wall) + " s");
  c.require(g_smoke.audit_mismatch.empty(), "audit replay mismatch: " + g_smoke.audit_mismatch);
  c.note("completed " + str(m.jobs_completed) + "/10");
  c.note("peak glideins " + str(m.peak_running_glideins));
  c.note("peak jobs " + str(m.peak_running_jobs));
  c.note("makespan " + str(m.makespan_s) + " s (reference " + str(ref) + ")");
  c.note("wall " + str(std::round(wall * 1000) / 1000) + " s");
  return c.outcome();
}

// ---- 2. pressure convergence ----------------------------------------------

Outcome criterion_2() {
  Check c;
  auto doc = minimal_doc();
  doc["services"]["frontend"]["max_pressure_per_entry"] = 5;
  const auto t = parse_topology(doc);
  const std::string entry = t.factory_config.entries.front().entry_id;
  const std::int64_t k = 5;
  const std::int64_t per_cycle = t.factory_config.entries.front().max_submit_per_cycle;
  const std::int64_t bound_cycles = (k + per_cycle - 1) / per_cycle + 1;

  // 100 jobs of 300 s: 16 slots need 7 rounds, well inside the pilot lifetime
  WorkloadSpec w;
  w.items.push_back({at_s(0), 100, {1, 1024, 0, 0}, secs(300), false});

  std::int64_t cycles = 0;
  std::optional<SimTime> seen_cycle;
  std::optional<std::int64_t> converged_at;
  std::int64_t checked = 0, off = 0, mismatches = 0;
  std::string first_off;
  std::optional<std::int64_t> queue_empty_at;
  SimOptions o;
  o.until = at_s(7200);
  o.observer = [&](const Simulation& sim) {
    const auto& f = sim.factory()->factory();
    if (f.last_cycle() != seen_cycle) {
      seen_cycle = f.last_cycle();
      ++cycles;
    }
    const auto p = count_pressure(f, entry);
    if (p != f.pressure(entry)) ++mismatches;
    if (!converged_at && p == k) converged_at = cycles;
    // demand persists while any job still waits in the queue; once the last
    // one is matched the frontend scales down, as the no-waste rule demands
    const auto& jobs = sim.frontend()->pool().jobs();
    bool remain = jobs.size() < 100;
    for (const auto& [id, j] : jobs)
      if (j.state == JobState::Idle) remain = true;
    if (!remain && !queue_empty_at) queue_empty_at = to_ms(sim.now());
    if (cycles >= bound_cycles && remain) {
      ++checked;
      if (p != k) {
        if (off++ == 0) first_off = "pressure " + str(p) + " at " + str(to_ms(sim.now())) + " ms";
      }
    }
  };
  auto r = run_simulation(t, w, o);
  g_logs.emplace_back("convergence", r.log);

  c.require(converged_at.has_value() && *converged_at <= bound_cycles,
            "reached " + str(k) + " after " + (converged_at ? str(*converged_at) : std::string("never")) +
                " cycles, bound " + str(bound_cycles));
  c.require(off == 0, str(off) + " events off target, first " + first_off);
  c.require(checked > 0, "no events observed while jobs remained");
  c.require(mismatches == 0, "Factory::pressure disagreed with the record count " + str(mismatches) + " times");
  c.require(r.metrics.jobs_completed == 100, "completed " + str(r.metrics.jobs_completed) + "/100");
  c.note("pressure " + str(k) + " after " + (converged_at ? str(*converged_at) : "-") + " cycles (bound " +
         str(bound_cycles) + ")");
  c.note(str(checked) + " events held at " + str(k) + " until the idle queue emptied at " +
         (queue_empty_at ? str(static_cast<double>(*queue_empty_at) / 1000) : std::string("-")) + " s");
  return c.outcome();
}

// ---- 3. throttle safety fuzz ----------------------------------------------

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
  }
  bool coin(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }
  template <class T>
  T pick(std::initializer_list<T> v) {
    return *(v.begin() + range(0, static_cast<std::int64_t>(v.size()) - 1));
  }

 private:
  std::mt19937_64 rng_;
};

nlohmann::json random_scenario(Gen& g, WorkloadSpec& w) {
  auto doc = minimal_doc();
  auto& ce = doc["services"]["ce"];
  ce["cycle_period_s"] = g.range(1, 2);
  ce["startup_delay_s"] = g.range(1, 5);
  ce["validation_failure_prob"] = g.pick({0.0, 0.1, 0.3, 0.5, 1.0});
  ce["nodes"] = nlohmann::json::array();
  const auto nodes = g.range(1, 3);
  for (std::int64_t i = 0; i < nodes; ++i)
    ce["nodes"].push_back({{"node_id", "node-" + str(i)},
                           {"actual", {{"cores", g.range(2, 8)}, {"memory_mb", 8192}, {"disk_mb", 1000}, {"gpus", 0}}}});
  ce["glidein"] = {{"max_lifetime_s", g.range(60, 600)}, {"idle_timeout_s", g.range(5, 30)},
                   {"poll_period_s", g.range(1, 3)}};

  auto& fac = doc["services"]["factory"];
  fac["cycle_period_s"] = g.range(1, 3);
  fac["entries"][0]["max_pressure"] = g.range(1, 8);
  fac["entries"][0]["max_submit_per_cycle"] = g.range(1, 5);

  auto& fe = doc["services"]["frontend"];
  fe["cycle_period_s"] = g.range(1, 3);
  fe["max_pressure_per_entry"] = g.range(1, 12);
  const auto total_max = g.range(1, 20);
  fe["total_max_glideins"] = total_max;
  fe["total_curb_glideins"] = g.range(1, total_max);
  fe["expansion_factor"] = g.pick({1, 2, 3});
  fe["pool"]["negotiation_period_s"] = g.range(1, 3);

  w.items.clear();
  const auto items = g.range(1, 4);
  for (std::int64_t i = 0; i < items; ++i)
    w.items.push_back({at_s(g.range(0, 120)), g.range(1, 20), {g.range(1, 4), g.range(256, 2048), 0, 0},
                       secs(g.range(1, 60)), g.coin(0.1)});
  return doc;
}

Outcome criterion_3() {
  Check c;
  Gen g(20240613);
  std::int64_t events = 0, violations = 0, bad_configs = 0, glideins = 0;
  std::string first;
  for (int s = 0; s < kFuzzScenarios; ++s) {
    WorkloadSpec w;
    const auto doc = random_scenario(g, w);
    TopologyConfig t;
    try {
      t = parse_topology(doc);
    } catch (const ConfigError& e) {
      if (bad_configs++ == 0) first = std::string("config rejected: ") + e.what();
      continue;
    }
    const auto& e = t.factory_config.entries.front();
    SimOptions o;
    o.seed = static_cast<std::uint64_t>(g.range(1, 1'000'000));
    o.until = at_s(400);
    o.observer = [&](const Simulation& sim) {
      ++events;
      const auto p = count_pressure(sim.factory()->factory(), e.entry_id);
      if (p > e.max_pressure && violations++ == 0)
        first = "scenario " + str(s) + ": pressure " + str(p) + " > " + str(e.max_pressure) + " at " +
                str(to_ms(sim.now())) + " ms";
    };
    auto r = run_simulation(t, w, o);
    glideins += static_cast<std::int64_t>(r.metrics.glideins.size());
    g_logs.emplace_back("fuzz-" + str(s), std::move(r.log));
  }
  c.require(violations == 0, str(violations) + " violations; first " + first);
  c.require(bad_configs == 0, str(bad_configs) + " generated configs rejected; " + first);
  c.require(glideins > 0, "no glideins were ever submitted");
  c.note(str(kFuzzScenarios) + " scenarios");
  c.note(str(events) + " events checked");
  c.note(str(glideins) + " glideins");
  c.note(str(violations) + " violations");
  return c.outcome();
}

// ---- 4. determinism -------------------------------------------------------

Outcome criterion_4() {
  Check c;
  const auto t = parse_topology(minimal_doc());
  const auto w = smoke_workload();
  std::set<std::string> hashes;
  for (int i = 0; i < 3; ++i) {
    SimOptions o;
    o.seed = 42;
    auto r = run_simulation(t, w, o);
    hashes.insert(r.log.hash());
    g_logs.emplace_back("determinism-" + str(i), std::move(r.log));
  }
  auto flaky = t;
  flaky.ce_config.validation_failure_prob = 0.2;
  std::map<std::uint64_t, std::string> by_seed;
  for (std::uint64_t seed : {42u, 43u}) {
    SimOptions o;
    o.seed = seed;
    auto r = run_simulation(flaky, w, o);
    by_seed[seed] = r.log.hash();
    g_logs.emplace_back("determinism-p0.2-seed" + str(seed), std::move(r.log));
  }
  c.require(hashes.size() == 1, str(hashes.size()) + " distinct hashes over 3 runs with seed 42");
  c.require(by_seed[42] != by_seed[43], "seeds 42 and 43 gave the same hash with failure prob 0.2");
  c.note("seed 42 x3 -> " + hashes.begin()->substr(0, 12));
  c.note("p=0.2: 42 -> " + by_seed[42].substr(0, 12) + ", 43 -> " + by_seed[43].substr(0, 12));
  return c.outcome();
}

// ---- 5. fake cores --------------------------------------------------------

/// Largest number of jobs running at once on a single glidein, from the raw
/// started/completed records.
std::int64_t peak_per_glidein(const EventLog& log, std::int64_t* glideins_used) {
  std::map<std::int64_t, std::vector<std::pair<std::int64_t, int>>> edges;
  for (const auto& a : raw_audit(log))
    if (a.action == "completed" || a.action == "failed")
      if (a.detail.contains("start")) {
        const auto g = a.detail.at("glidein").get<std::int64_t>();
        edges[g].push_back({a.detail.at("start").get<std::int64_t>(), +1});
        edges[g].push_back({a.detail.at("end").get<std::int64_t>(), -1});
      }
  std::int64_t best = 0;
  for (auto& [g, ev] : edges) {
    std::sort(ev.begin(), ev.end());  // ends sort before starts at equal times
    std::int64_t cur = 0;
    for (const auto& [t, d] : ev) best = std::max(best, cur += d);
  }
  if (glideins_used) *glideins_used = static_cast<std::int64_t>(edges.size());
  return best;
}

Outcome criterion_5() {
  Check c;
  auto run = [&](std::int64_t advertised_cores, const std::string& tag) {
    auto doc = minimal_doc();
    doc["services"]["ce"]["nodes"] = nlohmann::json::array(
        {{{"node_id", "node-0"},
          {"actual", {{"cores", 4}, {"memory_mb", 8192}, {"disk_mb", 1000}, {"gpus", 0}}},
          {"advertised", {{"cores", advertised_cores}, {"memory_mb", 8192}, {"disk_mb", 1000}, {"gpus", 0}}}}});
    WorkloadSpec w;
    // 16 x 512 MB fits the node's 8192 MB; only cores constrain
    w.items.push_back({at_s(0), 16, {1, 512, 0, 0}, secs(100), false});
    auto r = run_simulation(parse_topology(doc), w, {});
    std::int64_t used = 0;
    const auto peak = peak_per_glidein(r.log, &used);
    g_logs.emplace_back("fake-cores-" + tag, r.log);
    return std::tuple{peak, r.metrics.peak_running_jobs, r.metrics.jobs_completed, used};
  };
  const auto [fake_peak, fake_metric, fake_done, fake_used] = run(16, "16");
  const auto [real_peak, real_metric, real_done, real_used] = run(4, "4");
  c.require(fake_peak == 16, "advertised 16: " + str(fake_peak) + " concurrent on one glidein");
  c.require(fake_metric == 16, "advertised 16: metrics peak " + str(fake_metric));
  c.require(fake_done == 16, "advertised 16: completed " + str(fake_done));
  c.require(real_peak == 4 && real_metric == 4, "advertised 4: concurrency " + str(real_peak) + "/" + str(real_metric));
  c.require(real_done == 16, "advertised 4: completed " + str(real_done));
  c.note("advertised 16 -> " + str(fake_peak) + " concurrent on one glidein");
  c.note("advertised 4 -> " + str(real_peak) + " concurrent (" + str(real_used) + " glideins used)");
  return c.outcome();
}

// ---- 6. no waste ----------------------------------------------------------

Outcome criterion_6() {
  Check c;
  const auto audit = raw_audit(g_smoke.log);
  std::map<std::int64_t, std::int64_t> last_busy;  // glidein -> last job end, or registration
  std::map<std::int64_t, std::int64_t> done_at;
  std::set<std::int64_t> all;
  for (const auto& a : audit) {
    if (a.subject.rfind("glidein.", 0) == 0) {
      const auto id = std::stoll(a.subject.substr(8));
      all.insert(id);
      if (a.action == "registered") last_busy.try_emplace(id, a.t);
      if (a.action == "done") done_at[id] = a.t;
    } else if (a.action == "completed" || a.action == "failed") {
      const auto id = a.detail.at("glidein").get<std::int64_t>();
      auto& lb = last_busy[id];
      lb = std::max(lb, a.detail.at("end").get<std::int64_t>());
    }
  }
  std::int64_t worst = 0;
  for (auto id : all) {
    if (!done_at.contains(id)) {
      c.require(false, "glidein " + str(id) + " never reached Done");
      continue;
    }
    if (!last_busy.contains(id)) {
      c.require(false, "glidein " + str(id) + " finished without registering");
      continue;
    }
    const auto gap = done_at[id] - last_busy[id];
    worst = std::max(worst, gap);
    c.require(gap <= kNoWasteBound_ms, "glidein " + str(id) + " Done " + str(gap) + " ms after last work");
  }
  c.require(g_smoke.metrics.max_waste_s * 1000 <= kNoWasteBound_ms,
            "metrics waste " + str(g_smoke.metrics.max_waste_s) + " s > 32");
  c.require(!all.empty(), "no glideins in the smoke log");
  c.note(str(all.size()) + " glideins Done");
  c.note("worst gap " + str(static_cast<double>(worst) / 1000) + " s");
  c.note("max waste " + str(g_smoke.metrics.max_waste_s) + " s (bound 32)");
  return c.outcome();
}

// ---- 7. authentication matrix ---------------------------------------------

Outcome criterion_7() {
  Check c;
  const auto t = parse_topology(minimal_doc());
  auto auth = std::make_shared<Authority>(Authority::from_seed(99));
  const SimTime now = at_s(60);
  const auto ttl = secs(3600);

  struct Endpoint {
    std::string name;
    std::string subject;
    std::string audience;
    Scope scope;
    Scope other_scope;
    std::function<Expected<void, Reject>(const Token&)> submit;
  };

  ComputeEntrypoint ce(t.ce_config, auth);
  UserPool pool(t.pool_config, auth);
  Mailbox mailbox(t.factory_config.audience);
  const Token compute = auth->issue("frontend", t.ce_config.audience, Scope::ComputeCreate, ttl, at_s(0));
  std::uint64_t next_glidein = 1, next_seq = 1;

  std::vector<Endpoint> endpoints{
      {"ce", "frontend", t.ce_config.audience, Scope::ComputeCreate, Scope::JobSubmit,
       [&](const Token& tok) -> Expected<void, Reject> {
         return ce.submit_glidein({GlideinId{next_glidein++}, "frontend", "ce-workspace", tok}, now);
       }},
      {"pool", "user", t.pool_config.audience, Scope::JobSubmit, Scope::MailboxWrite,
       [&](const Token& tok) -> Expected<void, Reject> {
         auto r = pool.submit_job({"user", {1, 1024, 0, 0}, secs(10)}, tok, now);
         if (!r) return unexpected(r.error());
         return {};
       }},
      {"mailbox", "frontend", t.factory_config.audience, Scope::MailboxWrite, Scope::ComputeCreate,
       [&](const Token& tok) -> Expected<void, Reject> {
         RequestMessage m;
         m.client_id = "frontend";
         m.entry_id = "ce-workspace";
         m.seq = next_seq++;
         m.req_pressure = 1;
         m.req_max_run = 1;
         m.credential = compute;
         m.sent_at = now;
         m.sign(*auth);
         auto r = mailbox.put_request(*auth, m, tok, now);
         if (!r) return unexpected(r.error());
         return {};
       }},
  };

  std::int64_t cells = 0, false_accepts = 0, false_rejects = 0, wrong_reason = 0;
  auto expect = [&](const Endpoint& ep, const std::string& variant, const Token& tok, std::optional<Reject> want) {
    ++cells;
    auto got = ep.submit(tok);
    if (!want && !got) {
      ++false_rejects;
      c.require(false, ep.name + "/" + variant + " rejected: " + std::string(to_string(got.error())));
    } else if (want && got) {
      ++false_accepts;
      c.require(false, ep.name + "/" + variant + " accepted");
    } else if (want && got.error() != *want) {
      ++wrong_reason;
      c.require(false, ep.name + "/" + variant + " rejected as " + std::string(to_string(got.error())) +
                           ", expected " + std::string(to_string(*want)));
    }
  };

  std::int64_t flips = 0, wire_flips = 0;
  for (const auto& ep : endpoints) {
    const Token valid = auth->issue(ep.subject, ep.audience, ep.scope, ttl, at_s(0));
    expect(ep, "valid", valid, std::nullopt);
    expect(ep, "expired", auth->issue(ep.subject, ep.audience, ep.scope, secs(10), at_s(0)), Reject::Expired);
    expect(ep, "wrong-audience", auth->issue(ep.subject, "elsewhere.glideinwms.org", ep.scope, ttl, at_s(0)),
           Reject::WrongAudience);
    expect(ep, "wrong-scope", auth->issue(ep.subject, ep.audience, ep.other_scope, ttl, at_s(0)),
           Reject::WrongScope);
    // every single-bit flip of every byte of the wire form
    const auto wire = valid.wire();
    for (std::size_t i = 0; i < wire.size(); ++i)
      for (int bit = 0; bit < 8; ++bit) {
        auto flipped = wire;
        flipped[i] = static_cast<char>(flipped[i] ^ (1 << bit));
        if (auto tok = Token::from_wire(flipped)) {
          ++flips;
          expect(ep, "bit-flip@" + str(i) + "." + str(bit), *tok, Reject::BadSignature);
        } else {
          ++wire_flips;
          ++cells;
          auto v = auth->verify_wire(flipped, ep.audience, ep.scope, now);
          if (v) {
            ++false_accepts;
            c.require(false, ep.name + "/wire-flip@" + str(i) + " accepted");
          } else if (v.error() != Reject::BadSignature) {
            ++wrong_reason;
            c.require(false, ep.name + "/wire-flip@" + str(i) + " gave " + std::string(to_string(v.error())));
          }
        }
      }
    expect(ep, "valid-again", valid, std::nullopt);
  }
  c.note(str(cells) + " cells");
  c.note(str(flips) + " parseable flips, " + str(wire_flips) + " unparseable");
  c.note(str(false_accepts) + " false accepts, " + str(false_rejects) + " false rejects, " + str(wrong_reason) +
         " wrong reasons");
  return c.outcome();
}

// ---- 8. matching oracle ---------------------------------------------------

Outcome criterion_8() {
  Check c;
  auto auth = std::make_shared<Authority>(Authority::from_seed(8));
  const auto token = auth->issue("user", "frontend.glideinwms.org", Scope::JobSubmit, secs(3600), at_s(0));
  const std::vector<ResourceSpec> job_templates{{1, 1024, 0, 0}, {2, 4096, 0, 0}, {3, 512, 100, 0}};
  const std::vector<oracle::Ep> ep_templates{{{4, 4096, 100, 0}, false}, {{8, 8192, 1000, 0}, false}};
  std::int64_t instances = 0, mismatches = 0, ambiguous = 0, matched = 0, unmatched = 0;
  std::string first;
  oracle::for_each_instance(job_templates, ep_templates, 6, 3, [&](const auto& jobs, const auto& eps) {
    ++instances;
    const auto all = oracle::enumerate(jobs, eps);
    if (all.size() != 1) {
      if (ambiguous++ == 0 && first.empty()) first = "oracle produced " + str(all.size()) + " assignments";
      return;
    }
    const auto got = oracle::negotiate(jobs, eps, auth, token);
    if (got != all.front()) {
      if (mismatches++ == 0 && first.empty())
        first = "instance " + str(instances) + " (" + str(jobs.size()) + " jobs, " + str(eps.size()) + " eps)";
    }
    for (const auto& a : got) (a ? matched : unmatched)++;
  });
  c.require(instances == 16395, "enumerated " + str(instances) + " instances, expected 16395");
  c.require(mismatches == 0, str(mismatches) + " mismatches, first " + first);
  c.require(ambiguous == 0, str(ambiguous) + " instances without a unique oracle answer; " + first);
  c.note(str(instances) + " instances");
  c.note(str(matched) + " job placements, " + str(unmatched) + " left idle");
  c.note(str(mismatches) + " mismatches");
  return c.outcome();
}

// ---- 9. mode equivalence --------------------------------------------------

std::uint16_t free_port_block(int n) {
  for (auto base = static_cast<std::uint16_t>(31000 + (::getpid() % 1500) * 5); base < 60000; base += 11) {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) ok = port_free(static_cast<std::uint16_t>(base + i));
    if (ok) return base;
  }
  throw std::runtime_error("no free ports");
}

Outcome criterion_9() {
  Check c;
  const auto dir = fs::temp_directory_path() / ("glidemini-acceptance-" + str(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto doc = minimal_doc();
  const auto base = free_port_block(3);
  doc["mode"] = "procs";
  doc["secret_dir"] = (dir / "secrets").string();
  doc["services"]["ce"]["port"] = base;
  doc["services"]["factory"]["port"] = base + 1;
  doc["services"]["frontend"]["port"] = base + 2;
  const auto topo = dir / "topology.json";
  std::ofstream(topo) << doc.dump(2);

  LaunchOptions o;
  o.executable = GLIDEMINI_CLI;
  o.state_dir = dir / "state";
  o.log_dir = dir / "logs";

  SmokeReport r;
  try {
    r = smoke_test_procs(topo, o, std::chrono::seconds(static_cast<int>(kProcsWallBound_s)));
  } catch (const std::exception& e) {
    c.require(false, std::string("procs run threw: ") + e.what());
    return c.outcome();
  }
  if (fs::exists(o.log_dir / "events.log")) g_logs.emplace_back("procs", EventLog::read(o.log_dir / "events.log"));

  const auto sim = judge_smoke(g_smoke.log, 10);
  bool all_terminal = true;
  for (const auto& [state, n] : r.glidein_states)
    if (state != "Done" && state != "Failed") all_terminal = false;
  c.require(r.pass, "procs smoke failed: " + r.reason);
  c.require(r.completed_jobs == sim.completed_jobs, "completed job ids differ from the simulation");
  c.require(r.completed_jobs.size() == 10, "completed " + str(r.completed_jobs.size()) + "/10");
  c.require(all_terminal && !r.glidein_states.empty(), "non-terminal glideins remain");
  c.require(r.wall_s < kProcsWallBound_s, "wall " + str(r.wall_s) + " s");
  c.note("completed " + str(r.completed_jobs.size()) + " (same ids as sim: " +
         (r.completed_jobs == sim.completed_jobs ? "yes" : "no") + ")");
  std::string states;
  for (const auto& [s, n] : r.glidein_states) states += (states.empty() ? "" : " ") + s + "=" + str(n);
  c.note("glideins " + states);
  c.note("wall " + str(std::round(r.wall_s * 10) / 10) + " s");
  if (r.pass) fs::remove_all(dir);
  return c.outcome();
}

// ---- 10. exactly once -----------------------------------------------------

Outcome criterion_10() {
  Check c;
  std::int64_t completed = 0, jobs_seen = 0;
  std::set<std::string> origins;
  for (const auto& [tag, log] : g_logs) {
    origins.insert(tag.substr(0, tag.find('-')));
    std::map<std::string, int> finished, started, completions;
    for (const auto& a : raw_audit(log)) {
      if (a.subject.rfind("job.", 0) != 0) continue;
      if (a.action == "started") ++started[a.subject];
      if (a.action == "completed" || a.action == "failed") ++finished[a.subject];
      if (a.action == "completed") ++completions[a.subject];
    }
    const auto replay = replay_audit(log);
    for (const auto& [id, j] : replay.jobs) {
      ++jobs_seen;
      const std::string subject = "job." + str(id.value);
      if (finished[subject] > 1) c.require(false, tag + ": " + subject + " has " + str(finished[subject]) + " records");
      if (started[subject] > 1) c.require(false, tag + ": " + subject + " started " + str(started[subject]) + " times");
      if (j.state == JobState::Completed) {
        ++completed;
        if (completions[subject] != 1 || j.executions.size() != 1)
          c.require(false, tag + ": completed " + subject + " has " + str(j.executions.size()) + " executions");
      }
    }
  }
  for (const char* need : {"smoke", "convergence", "fuzz", "determinism", "fake", "procs"})
    c.require(origins.contains(need), std::string("no log from ") + need);
  c.note(str(g_logs.size()) + " logs");
  c.note(str(jobs_seen) + " jobs");
  c.note(str(completed) + " completed, each with one execution record");
  return c.outcome();
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria{
      {1, "smoke-sim", criterion_1},         {2, "pressure-convergence", criterion_2},
      {3, "throttle-fuzz", criterion_3},     {4, "determinism", criterion_4},
      {5, "fake-cores", criterion_5},        {6, "no-waste", criterion_6},
      {7, "auth-matrix", criterion_7},       {8, "matching-oracle", criterion_8},
      {9, "mode-equivalence", criterion_9},  {10, "exactly-once", criterion_10},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << cr.id << " " << cr.name << " (" << std::fixed
              << std::setprecision(1) << wall_since(t0) << " s): " << o.detail << std::defaultfloat << "\n"
              << std::flush;
  }
  std::cout << (failed == 0 ? "ALL PASS" : str(failed) + " FAILED") << "\n";
  return failed;
}
