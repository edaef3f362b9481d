// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace broomlite {

using Byte = std::uint8_t;

// A finite byte sequence. Sequences are little-endian when read as numbers:
// v[0] is the least significant byte. N-byte sequences interpreted unsigned
// act as addresses.
struct Bytes {
  std::vector<Byte> v;

  Bytes() = default;
  explicit Bytes(std::vector<Byte> b) : v(std::move(b)) {}

  static Bytes from_u64(std::uint64_t x, std::uint32_t size_bytes);
  static Bytes repeated(Byte b, std::uint32_t size_bytes);

  std::uint32_t size() const { return static_cast<std::uint32_t>(v.size()); }

  // Unsigned value; only valid for size() <= 8.
  std::uint64_t as_u64() const;
  // Sign-extended value; only valid for size() <= 8.
  std::int64_t as_i64() const;

  Bytes slice(std::uint32_t i, std::uint32_t j) const; // bytes [i, j)

  bool operator==(const Bytes& o) const { return v == o.v; }
  bool operator!=(const Bytes& o) const { return v != o.v; }
  bool operator<(const Bytes& o) const;

  std::string to_string() const; // decimal if small, hex otherwise, with size suffix
};

// Wrap-around arithmetic helpers over fixed-width unsigned values.
std::uint64_t trunc_to_size(std::uint64_t x, std::uint32_t size_bytes);

} // namespace broomlite
