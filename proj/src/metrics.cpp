#include "glidemini/metrics.hpp"

#include <algorithm>
#include <charconv>

namespace glidemini {
namespace {

std::optional<std::uint64_t> subject_number(const std::string& subject, std::string_view prefix) {
  if (subject.size() <= prefix.size() || subject.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  std::uint64_t v = 0;
  const char* first = subject.data() + prefix.size();
  const char* last = subject.data() + subject.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || p != last) return std::nullopt;
  return v;
}

SimTime detail_time(const AuditRecord& r, const char* field) {
  if (!r.detail.contains(field)) throw MalformedLog(r.subject + " " + std::string(to_string(r.action)) + " lacks " + field);
  return at_ms(r.detail.at(field).get<std::int64_t>());
}

GlideinId detail_glidein(const AuditRecord& r) {
  if (!r.detail.contains("glidein")) throw MalformedLog(r.subject + " record lacks glidein");
  return GlideinId{r.detail.at("glidein").get<std::uint64_t>()};
}

void apply_job(AuditReplay& rp, JobId id, const AuditRecord& r) {
  if (r.action == AuditVerb::Submitted) {
    if (rp.jobs.contains(id)) throw MalformedLog(r.subject + " submitted twice");
    rp.jobs[id].submitted = r.time;
    return;
  }
  auto it = rp.jobs.find(id);
  if (it == rp.jobs.end()) throw MalformedLog(r.subject + " has records before submission");
  auto& job = it->second;
  auto step = [&](JobEvent e) { job.state = transition(job.state, e); };

  switch (r.action) {
    case AuditVerb::Claimed:
      step(JobEvent::Matched);
      job.glidein = detail_glidein(r);
      break;
    case AuditVerb::Queued:
      step(JobEvent::ClaimRefused);
      job.glidein.reset();
      break;
    case AuditVerb::Started: {
      step(JobEvent::Started);
      const auto g = detail_glidein(r);
      job.glidein = g;
      auto& gv = rp.glideins[g];
      gv.open_jobs.insert(id);
      gv.open_starts[id] = detail_time(r, "start");
      if (gv.state == GlideinState::Registered) gv.state = transition(gv.state, GlideinEvent::JobStarted);
      break;
    }
    case AuditVerb::Completed:
    case AuditVerb::Failed: {
      step(r.action == AuditVerb::Completed ? JobEvent::Finished : JobEvent::Crashed);
      const auto g = detail_glidein(r);
      const auto start = detail_time(r, "start");
      const auto end = detail_time(r, "end");
      job.executions.push_back({g, r.detail.value("slot", std::uint64_t{0}), start, end});
      job.glidein.reset();
      auto& gv = rp.glideins[g];
      gv.open_jobs.erase(id);
      gv.open_starts.erase(id);
      gv.slot_intervals.emplace_back(start, end);
      if (gv.open_jobs.empty() && gv.state == GlideinState::Running)
        gv.state = transition(gv.state, GlideinEvent::JobFinishedNoneActive);
      break;
    }
    default:
      throw MalformedLog(r.subject + " cannot take verb " + std::string(to_string(r.action)));
  }
}

void apply_glidein(AuditReplay& rp, GlideinId id, const AuditRecord& r) {
  auto& g = rp.glideins[id];
  auto step = [&](GlideinEvent e) { g.state = transition(g.state, e); };
  switch (r.action) {
    case AuditVerb::Submitted:
      if (g.submitted) throw MalformedLog(r.subject + " submitted twice");
      g.submitted = r.time;
      break;
    case AuditVerb::Queued: step(GlideinEvent::Queued); break;
    case AuditVerb::Assigned: step(GlideinEvent::NodeAssigned); break;
    case AuditVerb::Validated:
      if (g.state != GlideinState::Starting) throw MalformedLog(r.subject + " validated outside Starting");
      break;
    case AuditVerb::Registered:
      step(GlideinEvent::Registered);
      g.registered = r.time;
      g.registered_ever = true;
      if (!g.open_jobs.empty()) step(GlideinEvent::JobStarted);
      break;
    case AuditVerb::Retiring: step(GlideinEvent::Retire); break;
    case AuditVerb::Done:
      step(GlideinEvent::Drained);
      g.terminal = r.time;
      break;
    case AuditVerb::Failed:
      step(GlideinEvent::Failed);
      g.terminal = r.time;
      break;
    default:
      throw MalformedLog(r.subject + " cannot take verb " + std::string(to_string(r.action)));
  }
}

double seconds(Duration d) { return to_seconds(d); }

struct Sweep {
  std::vector<std::pair<SimTime, int>> points;
  void add(SimTime a, SimTime b) {
    if (b <= a) return;
    points.emplace_back(a, +1);
    points.emplace_back(b, -1);
  }
  std::int64_t peak() {
    // Ends sort before starts at the same instant: half-open intervals.
    std::sort(points.begin(), points.end());
    std::int64_t cur = 0, best = 0;
    for (const auto& [t, d] : points) {
      cur += d;
      best = std::max(best, cur);
    }
    return best;
  }
};

}  // namespace

Duration union_measure(std::vector<std::pair<SimTime, SimTime>> intervals) {
  std::sort(intervals.begin(), intervals.end());
  Duration total{0};
  std::optional<std::pair<SimTime, SimTime>> cur;
  for (const auto& [a, b] : intervals) {
    if (b <= a) continue;
    if (cur && a <= cur->second) {
      cur->second = std::max(cur->second, b);
    } else {
      if (cur) total += cur->second - cur->first;
      cur = std::make_pair(a, b);
    }
  }
  if (cur) total += cur->second - cur->first;
  return total;
}

AuditReplay replay_audit(const EventLog& log) {
  AuditReplay rp;
  for (const auto& entry : log.entries()) {
    rp.last_time = entry.time;
    auto rec = AuditRecord::from_entry(entry);
    if (!rec) continue;
    if (rec->action == AuditVerb::RejectedAuth) {
      ++rp.auth_failures;
      continue;
    }
    try {
      if (auto j = subject_number(rec->subject, "job.")) {
        apply_job(rp, JobId{*j}, *rec);
      } else if (auto g = subject_number(rec->subject, "glidein.")) {
        apply_glidein(rp, GlideinId{*g}, *rec);
      } else {
        throw MalformedLog("unknown audit subject " + rec->subject);
      }
    } catch (const IllegalTransition& e) {
      throw MalformedLog("entry " + std::to_string(entry.seq) + " (" + rec->subject + "): " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw MalformedLog("entry " + std::to_string(entry.seq) + " (" + rec->subject + "): " + e.what());
    }
  }
  return rp;
}

MetricsReport metrics_report(const EventLog& log) {
  const auto rp = replay_audit(log);
  MetricsReport m;
  m.auth_failures = rp.auth_failures;
  const auto log_end = rp.last_time;

  std::optional<SimTime> first_submit, last_end;
  Sweep running_jobs;
  for (const auto& [id, job] : rp.jobs) {
    ++m.jobs_submitted;
    if (job.state == JobState::Completed) ++m.jobs_completed;
    if (job.state == JobState::Failed) ++m.jobs_failed;
    if (job.state == JobState::Removed) ++m.jobs_removed;
    if (!first_submit || job.submitted < *first_submit) first_submit = job.submitted;
    for (const auto& ex : job.executions) {
      running_jobs.add(ex.start_time, ex.end_time);
      if (!last_end || ex.end_time > *last_end) last_end = ex.end_time;
    }
  }
  if (first_submit && last_end) m.makespan_s = seconds(*last_end - *first_submit);

  Sweep running_glideins, active_glideins;
  for (const auto& [id, g] : rp.glideins) {
    GlideinMetrics gm;
    gm.state = std::string(to_string(g.state));
    gm.registered = g.registered_ever;
    auto intervals = g.slot_intervals;
    for (const auto& [job, start] : g.open_starts) {
      intervals.emplace_back(start, log_end);
      running_jobs.add(start, log_end);
    }
    gm.jobs = static_cast<std::int64_t>(g.slot_intervals.size());
    for (const auto& [a, b] : intervals) gm.slot_busy_s += seconds(b - a);
    const auto busy = union_measure(intervals);
    gm.busy_s = seconds(busy);

    // Running-glidein peak: the glidein counts while any of its slots is busy.
    std::sort(intervals.begin(), intervals.end());
    std::optional<std::pair<SimTime, SimTime>> cur;
    for (const auto& iv : intervals) {
      if (cur && iv.first <= cur->second) {
        cur->second = std::max(cur->second, iv.second);
      } else {
        if (cur) running_glideins.add(cur->first, cur->second);
        cur = iv;
      }
    }
    if (cur) running_glideins.add(cur->first, cur->second);

    if (g.registered) {
      const auto end = g.terminal.value_or(log_end);
      active_glideins.add(*g.registered, end);
      gm.idle_s = seconds(end - *g.registered - busy);
      if (g.submitted) gm.startup_s = seconds(*g.registered - *g.submitted);
    }
    if (is_terminal(g.state)) {
      ++m.glideins_by_terminal_state[gm.state];
      if (!g.registered_ever) ++m.failed_before_registration;
    }
    m.total_busy_s += gm.busy_s;
    m.total_idle_s += gm.idle_s;
    m.total_startup_s += gm.startup_s;
    m.max_waste_s = std::max(m.max_waste_s, gm.idle_s);
    m.glideins.emplace(id, std::move(gm));
  }
  m.peak_running_jobs = running_jobs.peak();
  m.peak_running_glideins = running_glideins.peak();
  m.peak_active_glideins = active_glideins.peak();
  return m;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [id, g] : glideins)
    per[std::to_string(id.value)] = {{"state", g.state},       {"registered", g.registered},
                                     {"startup_s", g.startup_s}, {"busy_s", g.busy_s},
                                     {"slot_busy_s", g.slot_busy_s}, {"idle_s", g.idle_s},
                                     {"jobs", g.jobs}};
  return {{"jobs_submitted", jobs_submitted},
          {"jobs_completed", jobs_completed},
          {"jobs_failed", jobs_failed},
          {"jobs_removed", jobs_removed},
          {"makespan_s", makespan_s},
          {"peak_running_jobs", peak_running_jobs},
          {"peak_running_glideins", peak_running_glideins},
          {"peak_active_glideins", peak_active_glideins},
          {"glideins", per},
          {"glideins_by_terminal_state", glideins_by_terminal_state},
          {"failed_before_registration", failed_before_registration},
          {"auth_failures", auth_failures},
          {"total_busy_s", total_busy_s},
          {"total_idle_s", total_idle_s},
          {"total_startup_s", total_startup_s},
          {"max_waste_s", max_waste_s}};
}

double waste(const EventLog& log, GlideinId glidein) {
  const auto rp = replay_audit(log);
  auto it = rp.glideins.find(glidein);
  if (it == rp.glideins.end() || !is_terminal(it->second.state))
    throw std::logic_error("glidein " + std::to_string(glidein.value) + " has not reached a terminal state");
  const auto& g = it->second;
  if (!g.registered) return 0.0;
  return to_seconds(*g.terminal - *g.registered - union_measure(g.slot_intervals));
}

}  // namespace glidemini
