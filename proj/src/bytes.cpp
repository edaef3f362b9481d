// SPDX-License-Identifier: Apache-2.0
#include "broomlite/bytes.hpp"

#include <cassert>
#include <sstream>

namespace broomlite {

Bytes Bytes::from_u64(std::uint64_t x, std::uint32_t size_bytes) {
  Bytes b;
  b.v.resize(size_bytes);
  for (std::uint32_t i = 0; i < size_bytes; ++i)
    b.v[i] = static_cast<Byte>((i < 8) ? (x >> (8 * i)) & 0xff : 0);
  return b;
}

Bytes Bytes::repeated(Byte c, std::uint32_t size_bytes) {
  Bytes b;
  b.v.assign(size_bytes, c);
  return b;
}

std::uint64_t Bytes::as_u64() const {
  assert(v.size() <= 8);
  std::uint64_t x = 0;
  for (std::size_t i = 0; i < v.size(); ++i) x |= std::uint64_t(v[i]) << (8 * i);
  return x;
}

std::int64_t Bytes::as_i64() const {
  assert(!v.empty() && v.size() <= 8);
  std::uint64_t x = as_u64();
  unsigned bits = 8 * static_cast<unsigned>(v.size());
  if (bits < 64 && (x >> (bits - 1)) & 1) x |= ~((std::uint64_t(1) << bits) - 1);
  return static_cast<std::int64_t>(x);
}

Bytes Bytes::slice(std::uint32_t i, std::uint32_t j) const {
  assert(i <= j && j <= v.size());
  Bytes b;
  b.v.assign(v.begin() + i, v.begin() + j);
  return b;
}

bool Bytes::operator<(const Bytes& o) const {
  if (v.size() != o.v.size()) return v.size() < o.v.size();
  for (std::size_t i = v.size(); i-- > 0;)
    if (v[i] != o.v[i]) return v[i] < o.v[i];
  return false;
}

std::string Bytes::to_string() const {
  std::ostringstream os;
  if (v.size() <= 8) {
    std::uint64_t u = as_u64();
    if (u < 4096) {
      os << u;
    } else {
      std::int64_t s = as_i64();
      if (s < 0 && s > -4096)
        os << s;
      else {
        os << "0x" << std::hex << u;
      }
    }
  } else {
    os << "0x" << std::hex;
    bool lead = true;
    for (std::size_t i = v.size(); i-- > 0;) {
      if (lead && v[i] == 0 && i > 0) continue;
      lead = false;
      os.width(lead ? 0 : 2);
      os.fill('0');
      os << unsigned(v[i]);
    }
  }
  os << ":" << std::dec << v.size();
  return os.str();
}

std::uint64_t trunc_to_size(std::uint64_t x, std::uint32_t size_bytes) {
  if (size_bytes >= 8) return x;
  return x & ((std::uint64_t(1) << (8 * size_bytes)) - 1);
}

} // namespace broomlite
