#include "simfuse/analysis.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "simfuse/parallel.hpp"

namespace simfuse {

ParticipationReport participation_ratio(const SearchResults& results, std::size_t size_filter,
                                        std::size_t q_max) {
  if (size_filter < 1 || size_filter > results.m) {
    throw std::invalid_argument("participation size filter " + std::to_string(size_filter) +
                                " outside [1, " + std::to_string(results.m) + "]");
  }
  if (q_max < 1) {
    throw std::invalid_argument("participation q_max must be >= 1");
  }
  std::vector<SearchEntry> sized;
  for (const auto& e : results.entries) {
    if (e.mask.size() == size_filter) {
      sized.push_back(e);
    }
  }
  if (sized.size() < q_max) {
    throw std::invalid_argument("only " + std::to_string(sized.size()) + " subsets of size " +
                                std::to_string(size_filter) + ", q_max is " +
                                std::to_string(q_max));
  }
  std::stable_sort(sized.begin(), sized.end(), [](const SearchEntry& a, const SearchEntry& b) {
    return a.recall != b.recall ? a.recall > b.recall : a.mask < b.mask;
  });

  ParticipationReport rep;
  rep.size_filter = size_filter;
  rep.q_max = q_max;
  rep.m = results.m;
  std::vector<std::size_t> running(results.m, 0);
  for (std::size_t q = 1; q <= q_max; ++q) {
    const SubsetMask mask = sized[q - 1].mask;
    rep.leading.push_back(mask);
    for (std::size_t m : mask.members()) {
      ++running[m];
    }
    rep.counts.push_back(running);
  }
  return rep;
}

AblationReport ablate(const SearchResults& results, SubsetMask base_mask, AblationScope scope) {
  if (!results.contains(base_mask)) {
    throw std::invalid_argument("ablation base mask " + std::to_string(base_mask.bits()) +
                                " is not in the search results");
  }
  AblationReport rep;
  rep.base_mask = base_mask;
  rep.base_recall = results.recall_of(base_mask);
  rep.scope = scope;
  for (std::size_t f : base_mask.members()) {
    AblationRow row;
    row.removed = f;
    bool found = false;
    for (const auto& e : results.entries) {
      if (e.mask.contains(f)) {
        continue;
      }
      if (scope == AblationScope::same_size && e.mask.size() != base_mask.size()) {
        continue;
      }
      if (!found || e.recall > row.best_recall) {
        row.best_recall = e.recall;
        row.best_mask = e.mask;
        found = true;
      }
    }
    row.delta = static_cast<std::int64_t>(rep.base_recall) -
                static_cast<std::int64_t>(row.best_recall);
    rep.rows.push_back(row);
  }
  return rep;
}

std::size_t HitSets::count(std::size_t repr) const {
  const auto& h = hits.at(repr);
  return static_cast<std::size_t>(std::count(h.begin(), h.end(), true));
}

HitSets hit_sets(std::span<const SimilarityMatrix> stack, unsigned workers) {
  HitSets out;
  out.n = stack.empty() ? 0 : stack.front().n;
  for (const auto& m : stack) {
    out.hits.push_back(recall_at_k(m, 1, workers).hits);
  }
  return out;
}

std::size_t oracle_recall(const HitSets& h) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < h.n; ++i) {
    count += std::any_of(h.hits.begin(), h.hits.end(),
                         [i](const std::vector<bool>& v) { return v[i]; })
                 ? 1
                 : 0;
  }
  return count;
}

ExclusiveReport exclusive_contributions(const HitSets& h) {
  ExclusiveReport rep;
  rep.per_repr.assign(h.hits.size(), 0);
  for (std::size_t i = 0; i < h.n; ++i) {
    std::size_t hitters = 0;
    std::size_t last = 0;
    for (std::size_t m = 0; m < h.hits.size(); ++m) {
      if (h.hits[m][i]) {
        ++hitters;
        last = m;
      }
    }
    if (hitters > 0) {
      ++rep.union_count;
    }
    if (hitters == 1) {
      ++rep.per_repr[last];
      ++rep.total_exclusive;
    }
  }
  return rep;
}

template <typename T>
std::vector<FailureCase> failure_cases(const SquareMatrix<T>& m, std::size_t top_n) {
  if (top_n < 1 || top_n > m.n) {
    throw std::out_of_range("failure top_n " + std::to_string(top_n) + " outside [1, " +
                            std::to_string(m.n) + "]");
  }
  std::vector<FailureCase> out;
  std::vector<std::size_t> idx(m.n);
  for (std::size_t q = 0; q < m.n; ++q) {
    const auto row = m.row(q);
    const std::size_t gt_rank = rank_of(row, q);
    if (gt_rank == 0) {
      continue;
    }
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(top_n), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        return row[a] != row[b] ? row[a] > row[b] : a < b;
                      });
    out.push_back({q, {idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(top_n)}, gt_rank});
  }
  return out;
}

template std::vector<FailureCase> failure_cases(const SquareMatrix<float>&, std::size_t);
template std::vector<FailureCase> failure_cases(const SquareMatrix<double>&, std::size_t);

}  // namespace simfuse
