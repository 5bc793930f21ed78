#include "glidemini/event_log.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

#include "glidemini/crypto.hpp"
#include "glidemini/model.hpp"

namespace glidemini {

std::string LogEntry::line() const {
  return canonical(nlohmann::json{
      {"time", to_ms(time)}, {"seq", seq}, {"service", service}, {"kind", kind}, {"payload", payload}});
}

LogEntry LogEntry::parse(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedLog(std::string("unparseable log line: ") + e.what());
  }
  if (!j.is_object() || j.size() != 5) throw MalformedLog("log line must have exactly five fields");
  try {
    LogEntry e;
    e.time = at_ms(j.at("time").get<std::int64_t>());
    e.seq = j.at("seq").get<std::uint64_t>();
    e.service = j.at("service").get<std::string>();
    e.kind = j.at("kind").get<std::string>();
    e.payload = j.at("payload");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw MalformedLog(std::string("bad log line field: ") + ex.what());
  }
}

const LogEntry& EventLog::append(SimTime time, std::string service, std::string kind, nlohmann::json payload) {
  append(LogEntry{time, entries_.size(), std::move(service), std::move(kind), std::move(payload)});
  return entries_.back();
}

void EventLog::append(LogEntry entry) {
  if (!entries_.empty()) {
    const auto& last = entries_.back();
    if (std::tie(entry.time, entry.seq) <= std::tie(last.time, last.seq))
      throw std::logic_error("event log entries must be strictly increasing in (time, seq)");
  }
  entries_.push_back(std::move(entry));
}

std::string EventLog::hash() const {
  crypto::Sha256Stream h;
  for (const auto& e : entries_) {
    h.update(e.line());
    h.update("\n");
  }
  return crypto::to_hex(h.finish());
}

void EventLog::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& e : entries_) out << e.line() << '\n';
}

EventLog EventLog::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedLog("cannot open " + path.string());
  EventLog log;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      log.append(LogEntry::parse(line));
    } catch (const std::logic_error& e) {
      throw MalformedLog(path.string() + ":" + std::to_string(n) + ": " + e.what());
    } catch (const MalformedLog& e) {
      throw MalformedLog(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return log;
}

EventLog EventLog::merge(const std::vector<EventLog>& logs) {
  std::vector<const LogEntry*> all;
  for (const auto& l : logs)
    for (const auto& e : l.entries()) all.push_back(&e);
  std::stable_sort(all.begin(), all.end(), [](const LogEntry* a, const LogEntry* b) {
    return std::tie(a->time, a->service, a->seq) < std::tie(b->time, b->service, b->seq);
  });
  EventLog out;
  for (const auto* e : all) out.append(e->time, e->service, e->kind, e->payload);
  return out;
}

}  // namespace glidemini
