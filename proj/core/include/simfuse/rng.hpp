#pragma once

#include <cstdint>
#include <optional>

namespace simfuse {

/// Portable seeded generator used by every synthetic fixture.
///
/// Stream: SplitMix64 (Steele, Lea & Flood). state += 0x9e3779b97f4a7c15, then
///   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
///   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
///   z ^ (z >> 31)
/// Uniforms take the top 53 bits: (x >> 11) * 2^-53, in [0, 1).
/// Normals use Box-Muller on two uniforms u1, u2 (u1 replaced by 1 - u1 so it
/// lies in (0, 1]): r = sqrt(-2 ln u1), returns r cos(2 pi u2) then caches
/// r sin(2 pi u2) for the next call.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double gaussian() noexcept;
  /// Uniform integer in [0, bound); bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  std::uint64_t state_;
  std::optional<double> spare_;
};

}  // namespace simfuse
