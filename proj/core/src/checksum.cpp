#include "simfuse/checksum.hpp"

#include <cstdio>

#include "simfuse/error.hpp"

namespace simfuse {

namespace {
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr const char* kPrefix = "fnv1a64:";
constexpr std::size_t kPrefixLen = 8;
}  // namespace

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= kFnvPrime;
  }
  return h;
}

std::string format_checksum(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return std::string(kPrefix) + buf;
}

std::uint64_t parse_checksum(const std::string& text) {
  if (text.size() != kPrefixLen + 16 || text.compare(0, kPrefixLen, kPrefix) != 0) {
    throw DataError("malformed checksum '" + text + "'");
  }
  std::uint64_t v = 0;
  for (std::size_t i = kPrefixLen; i < text.size(); ++i) {
    const char c = text[i];
    std::uint64_t digit = 0;
    if (c >= '0' && c <= '9') {
      digit = static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      digit = static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw DataError("malformed checksum '" + text + "'");
    }
    v = (v << 4) | digit;
  }
  return v;
}

}  // namespace simfuse
