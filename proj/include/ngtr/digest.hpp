#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ngtr {

// FNV-1a 64-bit. Stable across platforms/runs; used for request
// fingerprints and report digests, not for security.
inline uint64_t fnv1a64_bytes(const void* data, size_t len,
                              uint64_t seed = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t seed = 0xcbf29ce484222325ULL) {
  return fnv1a64_bytes(s.data(), s.size(), seed);
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

inline std::string digest_hex(std::string_view s) { return hex64(fnv1a64(s)); }

}  // namespace ngtr
