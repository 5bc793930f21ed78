#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace glidemini {

/// Clock for simulated and process-mode time. Ticks are milliseconds; in
/// simulation the epoch is the start of the run, in process mode it is the
/// Unix epoch.
struct SimClock {
  using rep = std::int64_t;
  using period = std::milli;
  using duration = std::chrono::duration<rep, period>;
  using time_point = std::chrono::time_point<SimClock, duration>;
  static constexpr bool is_steady = true;
};

using Duration = SimClock::duration;
using SimTime = SimClock::time_point;

constexpr SimTime at_ms(std::int64_t ms) { return SimTime{Duration{ms}}; }
constexpr SimTime at_s(std::int64_t s) { return SimTime{Duration{s * 1000}}; }
constexpr Duration ms(std::int64_t v) { return Duration{v}; }
constexpr Duration secs(std::int64_t v) { return Duration{v * 1000}; }

constexpr std::int64_t to_ms(SimTime t) { return t.time_since_epoch().count(); }
constexpr std::int64_t to_ms(Duration d) { return d.count(); }

/// Converts a (possibly fractional) number of seconds from a config file,
/// rounding to the nearest millisecond.
inline Duration seconds_to_duration(double seconds) {
  return Duration{static_cast<std::int64_t>(std::llround(seconds * 1000.0))};
}

inline double to_seconds(Duration d) { return static_cast<double>(d.count()) / 1000.0; }

}  // namespace glidemini
