#include "simfuse/analysis.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "test_util.hpp"

namespace simfuse {
namespace {

SearchResults results_from(std::size_t m, const std::vector<std::size_t>& recalls) {
  SearchResults r;
  r.m = m;
  for (std::size_t b = 1; b <= recalls.size(); ++b) {
    r.entries.push_back({SubsetMask(static_cast<std::uint32_t>(b)), recalls[b - 1]});
  }
  return r;
}

SearchResults random_results(std::size_t m, SplitMix64& rng, std::size_t max_recall = 40) {
  std::vector<std::size_t> recalls((std::size_t{1} << m) - 1);
  for (auto& v : recalls) {
    v = rng.below(max_recall);
  }
  return results_from(m, recalls);
}

HitSets hits_from(std::size_t n, const std::vector<std::vector<std::size_t>>& sets) {
  HitSets h;
  h.n = n;
  for (const auto& s : sets) {
    std::vector<bool> v(n, false);
    for (std::size_t i : s) v[i] = true;
    h.hits.push_back(v);
  }
  return h;
}

TEST(ParticipationTest, TopOneIsTheIndicatorOfTheBestMask) {
  SplitMix64 rng(1);
  const SearchResults r = random_results(6, rng);
  const ParticipationReport p = participation_ratio(r, 4, 15);
  const SubsetMask best = p.leading.front();
  for (std::size_t m = 0; m < 6; ++m) {
    EXPECT_EQ(p.counts[0][m], best.contains(m) ? 1U : 0U);
  }
  // The leader is the best size-4 subset.
  for (const auto& e : r.entries) {
    if (e.mask.size() == 4) {
      EXPECT_LE(e.recall, r.recall_of(best));
    }
  }
}

TEST(ParticipationTest, FeatureInEveryLeadingSubsetHasRatioOne) {
  // M=4, size 2. Every subset containing representation 3 scores higher.
  std::vector<std::size_t> recalls(15, 1);
  for (std::uint32_t b = 1; b <= 15; ++b) {
    if (SubsetMask(b).contains(3)) recalls[b - 1] = 10 + b;
  }
  const ParticipationReport p = participation_ratio(results_from(4, recalls), 2, 3);
  for (std::size_t q = 1; q <= 3; ++q) {
    EXPECT_DOUBLE_EQ(p.ratio(q, 3), 1.0);
  }
}

TEST(ParticipationTest, MatchesManualTallyOnHandAssignedRecalls) {
  // M=5, size-2 subsets with recalls assigned by hand.
  std::map<std::pair<int, int>, std::size_t> by_pair{
      {{0, 1}, 30}, {{0, 2}, 50}, {{0, 3}, 10}, {{0, 4}, 50}, {{1, 2}, 45},
      {{1, 3}, 20}, {{1, 4}, 5},  {{2, 3}, 40}, {{2, 4}, 60}, {{3, 4}, 15}};
  std::vector<std::size_t> recalls(31, 0);
  for (const auto& [pr, rec] : by_pair) {
    recalls[((1U << pr.first) | (1U << pr.second)) - 1] = rec;
  }
  const ParticipationReport p = participation_ratio(results_from(5, recalls), 2, 5);
  // Ranked: {2,4}=60, {0,2}=50 (mask 5), {0,4}=50 (mask 17), {1,2}=45, {2,3}=40.
  const std::vector<std::vector<std::size_t>> tally{
      {0, 0, 1, 0, 1}, {1, 0, 2, 0, 1}, {2, 0, 2, 0, 2}, {2, 1, 3, 0, 2}, {2, 1, 4, 1, 2}};
  ASSERT_EQ(p.counts.size(), 5U);
  for (std::size_t q = 0; q < 5; ++q) {
    EXPECT_EQ(p.counts[q], tally[q]) << "q=" << q + 1;
  }
}

TEST(ParticipationTest, CountsSumToQTimesSize) {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const SearchResults r = random_results(7, rng);
    const ParticipationReport p = participation_ratio(r, 4, 15);
    for (std::size_t q = 1; q <= 15; ++q) {
      std::size_t sum = 0;
      for (std::size_t m = 0; m < 7; ++m) {
        sum += p.counts[q - 1][m];
        EXPECT_LE(p.ratio(q, m), 1.0);
      }
      EXPECT_EQ(sum, q * 4);
    }
  }
}

TEST(ParticipationTest, TooFewSubsetsThrows) {
  SplitMix64 rng(3);
  EXPECT_THROW(participation_ratio(random_results(4, rng), 4, 2), std::invalid_argument);
  EXPECT_THROW(participation_ratio(random_results(4, rng), 5, 1), std::invalid_argument);
}

/// Exhaustive scan oracle for one ablation row.
std::size_t best_without(const SearchResults& r, std::size_t f, std::size_t only_size = 0) {
  std::size_t best = 0;
  for (std::uint32_t b = 1; b <= r.entries.size(); ++b) {
    const SubsetMask mask(b);
    if (mask.contains(f) || (only_size != 0 && mask.size() != only_size)) continue;
    best = std::max(best, r.entries[b - 1].recall);
  }
  return best;
}

TEST(AblationTest, MatchesExhaustiveScan) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const SearchResults r = random_results(3, rng);
    const SubsetMask base(static_cast<std::uint32_t>(1 + rng.below(7)));
    const AblationReport rep = ablate(r, base);
    ASSERT_EQ(rep.rows.size(), base.size());
    for (const auto& row : rep.rows) {
      EXPECT_EQ(row.best_recall, best_without(r, row.removed));
      EXPECT_EQ(row.delta, static_cast<std::int64_t>(rep.base_recall) -
                               static_cast<std::int64_t>(row.best_recall));
      EXPECT_LE(row.best_recall, best_overall(r).recall);
    }
  }
}

TEST(AblationTest, SingletonBaseSearchesTheFullComplement) {
  // masks 1..7; removing representation 0 leaves masks 2, 4, 6.
  const SearchResults r = results_from(3, {50, 3, 60, 8, 70, 6, 90});
  const AblationReport rep = ablate(r, SubsetMask(1));
  ASSERT_EQ(rep.rows.size(), 1U);
  EXPECT_EQ(rep.rows[0].best_recall, 8U);
  EXPECT_EQ(rep.rows[0].best_mask, SubsetMask(4));
  EXPECT_EQ(rep.rows[0].delta, 42);
}

TEST(AblationTest, SameSizeScopeRestrictsToTheBaseSize) {
  SplitMix64 rng(5);
  const SearchResults r = random_results(5, rng);
  const SubsetMask base(0b01011);
  const AblationReport rep = ablate(r, base, AblationScope::same_size);
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.best_recall, best_without(r, row.removed, 3));
    EXPECT_EQ(row.best_mask.size(), 3U);
  }
}

TEST(AblationTest, DeltaCanBeNegative) {
  const SearchResults r = results_from(2, {10, 30, 20});
  const AblationReport rep = ablate(r, SubsetMask(1));
  EXPECT_EQ(rep.rows[0].delta, -20);
}

TEST(AblationTest, AbsentBaseThrows) {
  const SearchResults r = results_from(2, {1, 2, 3});
  EXPECT_THROW(ablate(r, SubsetMask(4)), std::invalid_argument);
  EXPECT_THROW(ablate(r, SubsetMask()), std::invalid_argument);
}

TEST(OracleTest, UnionOfHitSets) {
  EXPECT_EQ(oracle_recall(hits_from(4, {{1, 2}, {2, 3}})), 3U);
  const HitSets single = hits_from(5, {{0, 3, 4}});
  EXPECT_EQ(oracle_recall(single), single.count(0));
}

TEST(OracleTest, MatchesBruteForceUnionAndBoundsSingles) {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    const std::size_t m = 1 + rng.below(5);
    std::vector<std::vector<std::size_t>> sets(m);
    std::set<std::size_t> all;
    for (auto& s : sets) {
      for (std::size_t i = 0; i < n; ++i) {
        if (rng.uniform() < 0.3) {
          s.push_back(i);
          all.insert(i);
        }
      }
    }
    const HitSets h = hits_from(n, sets);
    const std::size_t oracle = oracle_recall(h);
    EXPECT_EQ(oracle, all.size());
    for (std::size_t k = 0; k < m; ++k) {
      EXPECT_GE(oracle, h.count(k));
    }
    const ExclusiveReport ex = exclusive_contributions(h);
    EXPECT_LE(ex.total_exclusive, ex.union_count);
    EXPECT_EQ(ex.union_count, oracle);
    EXPECT_LE(ex.union_count, n);
  }
}

TEST(ExclusiveTest, SingleRepresentationOwnsAllItsHits) {
  const ExclusiveReport ex = exclusive_contributions(hits_from(6, {{0, 2, 5}}));
  EXPECT_EQ(ex.per_repr, std::vector<std::size_t>{3});
  EXPECT_EQ(ex.total_exclusive, 3U);
}

TEST(ExclusiveTest, DisjointSetsAreAllExclusive) {
  const ExclusiveReport ex = exclusive_contributions(hits_from(8, {{0, 1}, {2, 3, 4}, {7}}));
  EXPECT_EQ(ex.per_repr, (std::vector<std::size_t>{2, 3, 1}));
  EXPECT_EQ(ex.total_exclusive, ex.union_count);
}

TEST(ExclusiveTest, EqualSetsHaveNoExclusiveHits) {
  const ExclusiveReport ex = exclusive_contributions(hits_from(5, {{1, 3}, {1, 3}, {1, 3}}));
  EXPECT_EQ(ex.total_exclusive, 0U);
  EXPECT_EQ(ex.union_count, 2U);
}

TEST(HitSetsTest, MatchPerMatrixRecall) {
  SplitMix64 rng(7);
  std::vector<SimilarityMatrix> stack{testing::random_matrix("a", 9, rng),
                                      testing::random_matrix("b", 9, rng)};
  const HitSets h = hit_sets(stack, 2);
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_EQ(h.hits[m], recall_at_k(stack[m], 1).hits);
  }
}

TEST(FailureTest, PerfectDiagonalHasNoFailures) {
  SimilarityMatrix m{"d", 4, std::vector<float>(16, 0.0F)};
  for (std::size_t i = 0; i < 4; ++i) m.values[i * 5] = 1.0F;
  EXPECT_TRUE(failure_cases(m, 2).empty());
}

TEST(FailureTest, ConstantMatrixFailsEveryQueryButTheFirst) {
  const SimilarityMatrix m{"c", 5, std::vector<float>(25, 0.2F)};
  const auto cases = failure_cases(m, 3);
  ASSERT_EQ(cases.size(), 4U);
  EXPECT_EQ(cases[0].query, 1U);
  EXPECT_EQ(cases[0].ground_truth_rank, 1U);
  EXPECT_EQ(cases[0].top, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(cases[3].ground_truth_rank, 4U);
}

TEST(FailureTest, AgreesWithNaiveReranking) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const SimilarityMatrix m = testing::random_matrix("r", 10, rng);
    const auto cases = failure_cases(m, 5);
    std::size_t idx = 0;
    for (std::size_t q = 0; q < 10; ++q) {
      const auto order = testing::naive_argsort_desc(m.row(q));
      const auto gt = static_cast<std::size_t>(
          std::find(order.begin(), order.end(), q) - order.begin());
      if (gt == 0) continue;
      ASSERT_LT(idx, cases.size());
      EXPECT_EQ(cases[idx].query, q);
      EXPECT_EQ(cases[idx].ground_truth_rank, gt);
      EXPECT_EQ(cases[idx].top, std::vector<std::size_t>(order.begin(), order.begin() + 5));
      ++idx;
    }
    EXPECT_EQ(idx, cases.size());
  }
}

TEST(FailureTest, TopNOutOfRangeThrows) {
  const SimilarityMatrix m{"c", 2, {1, 0, 0, 1}};
  EXPECT_THROW(failure_cases(m, 0), std::out_of_range);
  EXPECT_THROW(failure_cases(m, 3), std::out_of_range);
}

}  // namespace
}  // namespace simfuse
