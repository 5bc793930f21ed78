#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace glidemini {

/// Integer resource quantities. Matching and slot carving are exact.
struct ResourceSpec {
  std::int64_t cores = 0;
  std::int64_t memory_mb = 0;
  std::int64_t disk_mb = 0;
  std::int64_t gpus = 0;

  friend bool operator==(const ResourceSpec&, const ResourceSpec&) = default;

  bool is_valid() const { return cores >= 0 && memory_mb >= 0 && disk_mb >= 0 && gpus >= 0; }

  ResourceSpec& operator+=(const ResourceSpec& o) {
    cores += o.cores;
    memory_mb += o.memory_mb;
    disk_mb += o.disk_mb;
    gpus += o.gpus;
    return *this;
  }
  friend ResourceSpec operator+(ResourceSpec a, const ResourceSpec& b) { return a += b; }
};

class ResourceUnderflow : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// True iff every field of `requirements` is <= the same field of `available`.
bool fits(const ResourceSpec& requirements, const ResourceSpec& available);

/// `available - requirements`; throws ResourceUnderflow unless fits().
ResourceSpec carve(const ResourceSpec& available, const ResourceSpec& requirements);

/// Inverse of carve.
ResourceSpec release(const ResourceSpec& remaining, const ResourceSpec& carved);

std::string to_string(const ResourceSpec& r);

void to_json(nlohmann::json& j, const ResourceSpec& r);
void from_json(const nlohmann::json& j, ResourceSpec& r);

}  // namespace glidemini
