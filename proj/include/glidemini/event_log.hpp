#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "glidemini/time.hpp"

namespace glidemini {

class MalformedLog : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One line of a service log or of the merged event log. `time` is in
/// milliseconds; `payload` must already be canonical-serializable.
struct LogEntry {
  SimTime time{};
  std::uint64_t seq = 0;
  std::string service;
  std::string kind;
  nlohmann::json payload;

  /// Canonical one-line form, without the trailing newline.
  std::string line() const;
  static LogEntry parse(std::string_view line);
};

/// Append-only, (time, seq) strictly increasing.
class EventLog {
 public:
  /// Appends with seq = number of entries so far. Throws std::logic_error if
  /// time goes backwards.
  const LogEntry& append(SimTime time, std::string service, std::string kind, nlohmann::json payload);
  /// Appends a fully formed entry; throws std::logic_error unless (time, seq)
  /// increases.
  void append(LogEntry entry);

  const std::vector<LogEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  /// Hex SHA-256 over every canonical line, each newline-terminated.
  std::string hash() const;

  void write(const std::filesystem::path& path) const;
  /// Throws MalformedLog naming the offending line.
  static EventLog read(const std::filesystem::path& path);

  /// Merges per-service logs by (time, service, original seq) and renumbers.
  static EventLog merge(const std::vector<EventLog>& logs);

 private:
  std::vector<LogEntry> entries_;
};

}  // namespace glidemini
