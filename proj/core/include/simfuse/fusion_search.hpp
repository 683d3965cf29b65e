#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simfuse/similarity.hpp"
#include "simfuse/subset_mask.hpp"

namespace simfuse {

enum class FusionMode { raw, normalized };

std::string_view to_string(FusionMode mode) noexcept;
/// Accepts "raw" or "normalized"; throws std::invalid_argument otherwise.
FusionMode parse_fusion_mode(std::string_view text);

/// Mask visited at `step` (1-based) of the reflected binary Gray sequence.
constexpr SubsetMask gray_mask(std::uint64_t step) noexcept {
  return SubsetMask(static_cast<std::uint32_t>(step ^ (step >> 1)));
}

/// Every non-empty mask over m representations, each once, consecutive
/// masks differing in exactly one bit. Requires 1 <= m <= kMaxReprs.
std::vector<SubsetMask> enumerate_subsets(std::size_t m);

/// The accumulator is re-summed from scratch at every step s with
/// (s - 1) % kResumInterval == 0.
inline constexpr std::uint64_t kResumInterval = 64;

/// Running fused matrix over rows [row_begin, row_end) that can be moved one
/// representation at a time.
class GrayAccumulator {
 public:
  GrayAccumulator(std::span<const SimilarityMatrix> stack, FusionMode mode,
                  std::span<const NormStats> stats, std::size_t row_begin, std::size_t row_end);

  /// Discards the running sum and sums `mask` directly.
  void assign(SubsetMask mask);
  /// Adds or removes representation m.
  void toggle(std::size_t m);

  SubsetMask mask() const noexcept { return mask_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t row_begin() const noexcept { return row_begin_; }
  std::size_t row_end() const noexcept { return row_end_; }
  /// Fused row for global query index i, i in [row_begin, row_end).
  std::span<const double> row(std::size_t i) const {
    return {acc_.data() + (i - row_begin_) * n_, n_};
  }

 private:
  void apply(std::size_t m, double sign);

  std::span<const SimilarityMatrix> stack_;
  FusionMode mode_;
  std::vector<NormStats> stats_;
  std::size_t n_;
  std::size_t row_begin_;
  std::size_t row_end_;
  SubsetMask mask_;
  std::vector<double> acc_;
};

struct SearchEntry {
  SubsetMask mask;
  std::size_t recall = 0;

  bool operator==(const SearchEntry&) const = default;
};

/// Recall for every non-empty subset. entries[b - 1] holds mask b.
struct SearchResults {
  FusionMode mode = FusionMode::raw;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t k = 1;
  std::vector<SearchEntry> entries;
  /// Per-subset hit vectors, aligned with entries; empty unless requested.
  std::vector<std::vector<bool>> hits;

  std::size_t recall_of(SubsetMask mask) const;
  bool contains(SubsetMask mask) const noexcept {
    return !mask.empty() && mask.bits() <= entries.size();
  }
};

struct SearchOptions {
  unsigned workers = 1;
  std::size_t k = 1;
  bool keep_hits = false;
  /// Query rows per work item.
  std::size_t tile_rows = 32;
};

/// Exhaustive fused recall@k over all 2^M - 1 subsets. Output is identical
/// for any worker count and tile size.
SearchResults search_all(std::span<const SimilarityMatrix> stack, FusionMode mode,
                         std::span<const NormStats> stats, const SearchOptions& options = {});

struct BestPoint {
  std::size_t size = 0;
  std::size_t recall = 0;
  SubsetMask mask;
};

/// Best recall per subset size 1..M; ties go to the lowest mask value.
std::vector<BestPoint> best_per_size(const SearchResults& results);

/// Global best entry (lowest mask on ties).
SearchEntry best_overall(const SearchResults& results);

/// CSV with header `subset,n_r,recall`, one row per mask in ascending order.
void write_search_csv(std::ostream& out, const SearchResults& results,
                      const std::vector<std::string>& names);
SearchResults read_search_csv(std::istream& in, FusionMode mode,
                              const std::vector<std::string>& names);

/// CSV with header `n_r,best_recall,subset`.
void write_best_per_size_csv(std::ostream& out, const std::vector<BestPoint>& curve,
                             const std::vector<std::string>& names);

}  // namespace simfuse
