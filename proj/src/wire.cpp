#include "wire.hpp"

#include <openssl/evp.h>

namespace hearth {

std::string canonical(const Json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

bool Digest::is_zero() const {
  for (auto b : bytes)
    if (b) return false;
  return true;
}

std::string Digest::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

static int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::optional<Digest> Digest::try_from_hex(const std::string& hex) {
  if (hex.size() != 64) return std::nullopt;
  Digest d;
  for (size_t i = 0; i < 32; ++i) {
    int hi = hex_nibble(hex[2 * i]);
    int lo = hex_nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    d.bytes[i] = static_cast<uint8_t>((hi << 4) | lo);
  }
  return d;
}

Digest Digest::from_hex(const std::string& hex) {
  auto d = try_from_hex(hex);
  if (!d) throw Error(Errc::parse, "bad digest hex: " + hex);
  return *d;
}

Digest sha256(const void* data, size_t len) {
  Digest d;
  unsigned int out_len = 0;
  if (EVP_Digest(data, len, d.bytes.data(), &out_len, EVP_sha256(), nullptr) != 1 ||
      out_len != 32) {
    throw Error(Errc::io, "sha256 failed");
  }
  return d;
}

Digest sha256(const std::string& s) { return sha256(s.data(), s.size()); }

void parse_fail(const std::string& where, const std::string& what) {
  throw Error(Errc::parse, where + ": " + what);
}

}  // namespace hearth
