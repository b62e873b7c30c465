#pragma once

// Canonical wire form shared by the commit store and the bus: JSON with
// sorted object keys, compact separators, UTF-8, integer numerics. The
// same bytes hash identically everywhere, so envelope digests and commit
// digests agree across processes.

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "common.hpp"

namespace hearth {

// nlohmann's default object_t is std::map, which keeps keys sorted.
using Json = nlohmann::json;

// Compact canonical dump of a JSON value.
std::string canonical(const Json& j);

// 32-byte content digest, rendered as lowercase hex.
struct Digest {
  std::array<uint8_t, 32> bytes{};

  bool operator==(const Digest&) const = default;
  auto operator<=>(const Digest&) const = default;

  bool is_zero() const;
  std::string hex() const;
  static Digest from_hex(const std::string& hex);  // throws Errc::parse
  static std::optional<Digest> try_from_hex(const std::string& hex);
};

using CommitHash = Digest;

Digest sha256(const void* data, size_t len);
Digest sha256(const std::string& s);

// Parse failure helper with a consistent message shape.
[[noreturn]] void parse_fail(const std::string& where, const std::string& what);

}  // namespace hearth

namespace std {
template <>
struct hash<hearth::Digest> {
  size_t operator()(const hearth::Digest& d) const noexcept {
    size_t h;
    static_assert(sizeof(h) <= sizeof(d.bytes));
    __builtin_memcpy(&h, d.bytes.data(), sizeof(h));
    return h;
  }
};
}  // namespace std
