#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace glidemini::crypto {

using Digest = std::array<std::uint8_t, 32>;

Digest hmac_sha256(std::span<const std::uint8_t> key, std::string_view data);
Digest sha256(std::string_view data);

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Returns an empty vector if `hex` is not an even-length hex string.
std::vector<std::uint8_t> from_hex(std::string_view hex);

/// Constant-time comparison of equal-length strings.
bool equal_constant_time(std::string_view a, std::string_view b);

std::vector<std::uint8_t> random_bytes(std::size_t n);

/// Incremental SHA-256, used to hash long event logs without materialising them.
class Sha256Stream {
 public:
  Sha256Stream();
  ~Sha256Stream();
  Sha256Stream(Sha256Stream&&) noexcept;
  Sha256Stream& operator=(Sha256Stream&&) noexcept;

  void update(std::string_view data);
  Digest finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace glidemini::crypto
