#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "simfuse/feature_store.hpp"
#include "simfuse/subset_mask.hpp"

namespace simfuse {

/// Dense N x N matrix, values[i * n + j] = similarity of left item i to right
/// item j.
template <typename T>
struct SquareMatrix {
  std::string name;
  std::size_t n = 0;
  std::vector<T> values;

  std::span<const T> row(std::size_t i) const { return {values.data() + i * n, n}; }
  T at(std::size_t i, std::size_t j) const { return values[i * n + j]; }

  bool operator==(const SquareMatrix&) const = default;
};

/// Per-representation cosine similarities, stored at single precision.
using SimilarityMatrix = SquareMatrix<float>;
/// Sum over a subset of similarity matrices; may leave [-1, 1].
using FusedMatrix = SquareMatrix<double>;

/// Mean and population standard deviation of a similarity matrix.
struct NormStats {
  double mean = 0.0;
  double std = 0.0;
};

/// Which entries matrix_stats aggregates over.
enum class StatsScope { full, off_diagonal };

/// Below this standard deviation a matrix is treated as constant and its
/// normalized term contributes zero.
inline constexpr double kMinStd = 1e-9;

/// dot(left.row(i), right.row(j)) accumulated in double. Inputs are assumed
/// unit-norm; throws std::invalid_argument on a dim or size mismatch.
SimilarityMatrix cosine_similarity_matrix(const FeatureSet& left, const FeatureSet& right,
                                          unsigned workers = 1);

/// One similarity matrix per representation, in gallery order.
std::vector<SimilarityMatrix> similarity_stack(const PairedGallery& gallery,
                                               unsigned workers = 1);

NormStats matrix_stats(const SimilarityMatrix& m, StatsScope scope = StatsScope::full);
std::vector<NormStats> stack_stats(std::span<const SimilarityMatrix> stack,
                                   StatsScope scope = StatsScope::full);

/// z-score of one entry; zero when the matrix is (numerically) constant.
inline double normalized_term(float value, const NormStats& s) noexcept {
  return s.std < kMinStd ? 0.0 : (static_cast<double>(value) - s.mean) / s.std;
}

/// Elementwise sum of the selected matrices.
FusedMatrix combine_raw(std::span<const SimilarityMatrix> stack, SubsetMask subset);

/// Elementwise sum of (value - mean_k) / std_k over the selected matrices.
FusedMatrix combine_normalized(std::span<const SimilarityMatrix> stack,
                               std::span<const NormStats> stats, SubsetMask subset);

/// Gallery indices for one query, most similar first; ties go to the lower
/// gallery index.
struct Ranking {
  std::size_t query = 0;
  std::vector<std::size_t> order;
};

template <typename T>
Ranking rank_row(const SquareMatrix<T>& m, std::size_t query);

/// Position of `target` in the ranking of `row` without sorting:
/// #{j : row[j] > row[target]} + #{j < target : row[j] == row[target]}.
template <typename T>
std::size_t rank_of(std::span<const T> row, std::size_t target) noexcept {
  const T v = row[target];
  std::size_t pos = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    pos += static_cast<std::size_t>(row[j] > v || (j < target && row[j] == v));
  }
  return pos;
}

struct RecallResult {
  std::size_t k = 1;
  std::size_t count = 0;
  std::vector<bool> hits;
};

/// Query i is a hit iff gallery item i ranks within the first k.
template <typename T>
RecallResult recall_at_k(const SquareMatrix<T>& m, std::size_t k, unsigned workers = 1);

/// Similarity-matrix cache in the feature-set file format (an N x N "feature
/// set" whose item ids are the right-side ids).
void write_similarity_matrix(const SimilarityMatrix& m, const std::vector<std::string>& item_ids,
                             const std::filesystem::path& manifest);
SimilarityMatrix read_similarity_matrix(const std::filesystem::path& manifest);

}  // namespace simfuse
