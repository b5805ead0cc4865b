#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace xtend {

inline constexpr std::string_view kCsvVersion = "xtend v1";

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// 17 significant digits: round-trips every double.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// First line of every CSV artifact.
inline std::string csv_preamble(std::string_view canonical_config) {
  return "# " + std::string(kCsvVersion) + " config_hash=" + hex64(fnv1a64(canonical_config)) + "\n";
}

}  // namespace xtend
