// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace taskspace {

/// Incremental SHA-256, hex digest.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  Sha256& update(std::span<const std::uint8_t> bytes);
  Sha256& update_doubles(std::span<const double> values);  // little-endian IEEE-754
  Sha256& update_floats(std::span<const float> values);
  std::string hex();

 private:
  struct Impl;
  Impl* impl_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace taskspace
