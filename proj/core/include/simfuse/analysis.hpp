#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "simfuse/fusion_search.hpp"
#include "simfuse/similarity.hpp"

namespace simfuse {

/// How often each representation appears among the q best subsets of one size.
struct ParticipationReport {
  std::size_t size_filter = 4;
  std::size_t q_max = 15;
  std::size_t m = 0;
  /// The q_max best masks of the filtered size, best first.
  std::vector<SubsetMask> leading;
  /// counts[q - 1][m] = appearances of representation m in leading[0..q).
  std::vector<std::vector<std::size_t>> counts;

  double ratio(std::size_t q, std::size_t repr) const {
    return static_cast<double>(counts[q - 1][repr]) / static_cast<double>(q);
  }
};

/// Subsets of `size_filter` members ranked by recall (descending, ties by
/// ascending mask). Throws std::invalid_argument when fewer than q_max such
/// subsets exist.
ParticipationReport participation_ratio(const SearchResults& results, std::size_t size_filter = 4,
                                        std::size_t q_max = 15);

enum class AblationScope { all_sizes, same_size };

struct AblationRow {
  std::size_t removed = 0;
  /// Best recall among subsets without `removed`; 0 with an empty mask when
  /// no such subset exists.
  std::size_t best_recall = 0;
  SubsetMask best_mask;
  /// base_recall - best_recall; may be negative.
  std::int64_t delta = 0;
};

struct AblationReport {
  SubsetMask base_mask;
  std::size_t base_recall = 0;
  AblationScope scope = AblationScope::all_sizes;
  std::vector<AblationRow> rows;
};

/// One row per member of base_mask. With AblationScope::same_size only
/// subsets of base_mask's size are searched.
AblationReport ablate(const SearchResults& results, SubsetMask base_mask,
                      AblationScope scope = AblationScope::all_sizes);

/// recall@1 hit vector of each representation on its own.
struct HitSets {
  std::size_t n = 0;
  std::vector<std::vector<bool>> hits;

  std::size_t count(std::size_t repr) const;
};

HitSets hit_sets(std::span<const SimilarityMatrix> stack, unsigned workers = 1);

/// Queries retrieved by at least one representation.
std::size_t oracle_recall(const HitSets& h);

struct ExclusiveReport {
  /// Queries hit by representation m and by no other.
  std::vector<std::size_t> per_repr;
  std::size_t total_exclusive = 0;
  std::size_t union_count = 0;
};

ExclusiveReport exclusive_contributions(const HitSets& h);

struct FailureCase {
  std::size_t query = 0;
  std::vector<std::size_t> top;
  std::size_t ground_truth_rank = 0;
};

/// Every query whose partner is not ranked first, with its top_n retrievals.
template <typename T>
std::vector<FailureCase> failure_cases(const SquareMatrix<T>& m, std::size_t top_n);

}  // namespace simfuse
