#pragma once

#include <cstdint>
#include <filesystem>
#include <unistd.h>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "glidemini/credentials.hpp"
#include "glidemini/resources.hpp"

namespace testsupport {

/// Small hand-rolled generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  std::int64_t range(std::int64_t lo, std::int64_t hi) {  // inclusive
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
  }
  bool coin(double p = 0.5) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(range(0, static_cast<std::int64_t>(v.size()) - 1))];
  }
  glidemini::ResourceSpec resources(std::int64_t max_cores = 16, std::int64_t max_mem = 16384) {
    return {range(0, max_cores), range(0, max_mem), range(0, 2000), range(0, 2)};
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("glidemini-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::permissions(path_, std::filesystem::perms::owner_all, std::filesystem::perm_options::add, ec);
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::shared_ptr<glidemini::Authority> test_authority(std::uint64_t seed = 7) {
  return std::make_shared<glidemini::Authority>(glidemini::Authority::from_seed(seed));
}

inline glidemini::ResourceSpec R(std::int64_t c, std::int64_t m, std::int64_t d = 0, std::int64_t g = 0) {
  return {c, m, d, g};
}

}  // namespace testsupport
