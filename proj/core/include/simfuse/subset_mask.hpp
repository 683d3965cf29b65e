#pragma once

#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace simfuse {

/// Largest representation count the subset search accepts (2^24 - 1 subsets).
inline constexpr std::size_t kMaxReprs = 24;

/// Bit m set iff representation m (in lexicographic name order) is selected.
class SubsetMask {
 public:
  constexpr SubsetMask() = default;
  constexpr explicit SubsetMask(std::uint32_t bits) : bits_(bits) {}

  static constexpr SubsetMask single(std::size_t m) {
    return SubsetMask(std::uint32_t{1} << m);
  }
  static constexpr SubsetMask all(std::size_t m) {
    return SubsetMask(m >= 32 ? ~std::uint32_t{0} : (std::uint32_t{1} << m) - 1);
  }

  constexpr std::uint32_t bits() const noexcept { return bits_; }
  constexpr std::size_t size() const noexcept {
    return static_cast<std::size_t>(std::popcount(bits_));
  }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr bool contains(std::size_t m) const noexcept { return (bits_ >> m) & 1U; }
  constexpr SubsetMask with(std::size_t m) const noexcept {
    return SubsetMask(bits_ | (std::uint32_t{1} << m));
  }
  constexpr SubsetMask without(std::size_t m) const noexcept {
    return SubsetMask(bits_ & ~(std::uint32_t{1} << m));
  }

  /// Selected indices in ascending order.
  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    for (std::uint32_t b = bits_; b != 0; b &= b - 1) {
      out.push_back(static_cast<std::size_t>(std::countr_zero(b)));
    }
    return out;
  }

  constexpr auto operator<=>(const SubsetMask&) const = default;

 private:
  std::uint32_t bits_ = 0;
};

/// Joins the selected names with '+', e.g. "conv+ret+shp".
std::string mask_to_names(SubsetMask mask, const std::vector<std::string>& names);

/// Inverse of mask_to_names; throws DataError on an unknown name.
SubsetMask mask_from_names(const std::string& joined, const std::vector<std::string>& names);

}  // namespace simfuse
