#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace glidemini {

template <class Tag>
struct Id {
  std::uint64_t value = 0;
  friend auto operator<=>(const Id&, const Id&) = default;
};

using JobId = Id<struct JobTag>;
using GlideinId = Id<struct GlideinTag>;

/// Audit subjects are strings so that jobs and glideins share one log column.
inline std::string subject_of(JobId id) { return "job." + std::to_string(id.value); }
inline std::string subject_of(GlideinId id) { return "glidein." + std::to_string(id.value); }

}  // namespace glidemini

template <class Tag>
struct std::hash<glidemini::Id<Tag>> {
  std::size_t operator()(const glidemini::Id<Tag>& id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
