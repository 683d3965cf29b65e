#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace simfuse {

/// 64-bit FNV-1a over a byte range.
std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

/// "fnv1a64:" followed by 16 lowercase hex digits.
std::string format_checksum(std::uint64_t value);

/// Inverse of format_checksum; throws DataError on malformed text.
std::uint64_t parse_checksum(const std::string& text);

}  // namespace simfuse
