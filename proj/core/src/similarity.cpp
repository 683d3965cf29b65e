#include "simfuse/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "simfuse/error.hpp"
#include "simfuse/parallel.hpp"

namespace simfuse {

SimilarityMatrix cosine_similarity_matrix(const FeatureSet& left, const FeatureSet& right,
                                          unsigned workers) {
  if (left.dim != right.dim) {
    throw std::invalid_argument("representation '" + left.repr_name + "': left dim " +
                                std::to_string(left.dim) + " != right dim " +
                                std::to_string(right.dim));
  }
  if (left.n_items != right.n_items) {
    throw std::invalid_argument("representation '" + left.repr_name +
                                "': left/right item counts differ");
  }
  const std::size_t n = left.n_items;
  const std::size_t dim = left.dim;
  SimilarityMatrix out{left.repr_name, n, std::vector<float>(n * n)};

  parallel_for(n, workers, [&](unsigned, std::size_t i) {
    const float* a = left.rows.data() + i * dim;
    float* dst = out.values.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const float* b = right.rows.data() + j * dim;
      double acc = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        acc += static_cast<double>(a[d]) * static_cast<double>(b[d]);
      }
      dst[j] = static_cast<float>(acc);
    }
  });
  return out;
}

std::vector<SimilarityMatrix> similarity_stack(const PairedGallery& gallery, unsigned workers) {
  std::vector<SimilarityMatrix> stack;
  stack.reserve(gallery.n_reprs());
  for (std::size_t m = 0; m < gallery.n_reprs(); ++m) {
    stack.push_back(cosine_similarity_matrix(gallery.left[m], gallery.right[m], workers));
  }
  return stack;
}

NormStats matrix_stats(const SimilarityMatrix& m, StatsScope scope) {
  // Welford's update keeps the variance accurate for the 36M-entry case.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < m.n; ++i) {
    const auto row = m.row(i);
    for (std::size_t j = 0; j < m.n; ++j) {
      if (scope == StatsScope::off_diagonal && i == j) {
        continue;
      }
      const double x = row[j];
      ++count;
      const double delta = x - mean;
      mean += delta / static_cast<double>(count);
      m2 += delta * (x - mean);
    }
  }
  if (count == 0) {
    return {};
  }
  return {mean, std::sqrt(std::max(0.0, m2 / static_cast<double>(count)))};
}

std::vector<NormStats> stack_stats(std::span<const SimilarityMatrix> stack, StatsScope scope) {
  std::vector<NormStats> out;
  out.reserve(stack.size());
  for (const auto& m : stack) {
    out.push_back(matrix_stats(m, scope));
  }
  return out;
}

namespace {

std::size_t checked_size(std::span<const SimilarityMatrix> stack, SubsetMask subset) {
  if (subset.empty()) {
    throw std::invalid_argument("fusion subset is empty");
  }
  if (stack.empty()) {
    throw std::invalid_argument("similarity stack is empty");
  }
  const std::size_t m_count = stack.size();
  if (m_count < 32 && (subset.bits() >> m_count) != 0) {
    throw std::invalid_argument("subset selects representations beyond the stack");
  }
  const std::size_t n = stack.front().n;
  for (const auto& m : stack) {
    if (m.n != n || m.values.size() != n * n) {
      throw std::invalid_argument("similarity matrices disagree on N");
    }
  }
  return n;
}

}  // namespace

FusedMatrix combine_raw(std::span<const SimilarityMatrix> stack, SubsetMask subset) {
  const std::size_t n = checked_size(stack, subset);
  FusedMatrix out{"", n, std::vector<double>(n * n, 0.0)};
  for (std::size_t k : subset.members()) {
    const auto& src = stack[k].values;
    for (std::size_t e = 0; e < src.size(); ++e) {
      out.values[e] += static_cast<double>(src[e]);
    }
  }
  return out;
}

FusedMatrix combine_normalized(std::span<const SimilarityMatrix> stack,
                               std::span<const NormStats> stats, SubsetMask subset) {
  const std::size_t n = checked_size(stack, subset);
  if (stats.size() != stack.size()) {
    throw std::invalid_argument("normalization stats are not aligned with the stack");
  }
  FusedMatrix out{"", n, std::vector<double>(n * n, 0.0)};
  for (std::size_t k : subset.members()) {
    const auto& src = stack[k].values;
    const NormStats s = stats[k];
    for (std::size_t e = 0; e < src.size(); ++e) {
      out.values[e] += normalized_term(src[e], s);
    }
  }
  return out;
}

template <typename T>
Ranking rank_row(const SquareMatrix<T>& m, std::size_t query) {
  if (query >= m.n) {
    throw std::out_of_range("query index " + std::to_string(query) + " out of range for N=" +
                            std::to_string(m.n));
  }
  const auto row = m.row(query);
  Ranking r{query, std::vector<std::size_t>(m.n)};
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  return r;
}

template <typename T>
RecallResult recall_at_k(const SquareMatrix<T>& m, std::size_t k, unsigned workers) {
  if (k < 1 || k > m.n) {
    throw std::out_of_range("recall cutoff k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(m.n) + "]");
  }
  std::vector<char> hit(m.n, 0);
  parallel_for(m.n, workers, [&](unsigned, std::size_t i) {
    hit[i] = rank_of(m.row(i), i) < k ? 1 : 0;
  });
  RecallResult out{k, 0, std::vector<bool>(m.n)};
  for (std::size_t i = 0; i < m.n; ++i) {
    out.hits[i] = hit[i] != 0;
    out.count += hit[i] != 0 ? 1 : 0;
  }
  return out;
}

template Ranking rank_row(const SquareMatrix<float>&, std::size_t);
template Ranking rank_row(const SquareMatrix<double>&, std::size_t);
template RecallResult recall_at_k(const SquareMatrix<float>&, std::size_t, unsigned);
template RecallResult recall_at_k(const SquareMatrix<double>&, std::size_t, unsigned);

void write_similarity_matrix(const SimilarityMatrix& m, const std::vector<std::string>& item_ids,
                             const std::filesystem::path& manifest) {
  FeatureSet fs{m.name, m.n, m.n, m.values, item_ids};
  write_feature_set(fs, manifest);
}

SimilarityMatrix read_similarity_matrix(const std::filesystem::path& manifest) {
  FeatureSet fs = read_feature_set(manifest);
  if (fs.n_items != fs.dim) {
    throw DataError("'" + manifest.string() + "': similarity cache is not square");
  }
  return {fs.repr_name, fs.n_items, std::move(fs.rows)};
}

}  // namespace simfuse
