#include "simfuse/fusion_search.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <set>
#include <sstream>

#include "simfuse/error.hpp"
#include "test_util.hpp"

namespace simfuse {
namespace {

std::vector<SimilarityMatrix> random_stack(std::size_t m, std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<SimilarityMatrix> stack;
  for (std::size_t k = 0; k < m; ++k) {
    stack.push_back(testing::random_matrix("r" + std::to_string(k), n, rng));
  }
  return stack;
}

/// Fused recall computed from scratch for one subset.
std::size_t direct_recall(const std::vector<SimilarityMatrix>& stack,
                          const std::vector<NormStats>& stats, FusionMode mode,
                          SubsetMask mask, std::size_t k = 1) {
  const FusedMatrix f = mode == FusionMode::raw ? combine_raw(stack, mask)
                                                : combine_normalized(stack, stats, mask);
  return recall_at_k(f, k).count;
}

TEST(EnumerateTest, SingleRepresentation) {
  EXPECT_EQ(enumerate_subsets(1), std::vector<SubsetMask>{SubsetMask(1)});
}

TEST(EnumerateTest, TwoRepresentationsAreGrayAdjacent) {
  const auto masks = enumerate_subsets(2);
  ASSERT_EQ(masks.size(), 3U);
  for (std::size_t s = 1; s < masks.size(); ++s) {
    EXPECT_EQ(std::popcount(masks[s].bits() ^ masks[s - 1].bits()), 1);
  }
}

TEST(EnumerateTest, ElevenRepresentationsGive2047DistinctMasks) {
  const auto masks = enumerate_subsets(11);
  ASSERT_EQ(masks.size(), 2047U);
  std::set<std::uint32_t> seen;
  for (std::size_t s = 0; s < masks.size(); ++s) {
    EXPECT_FALSE(masks[s].empty());
    EXPECT_LT(masks[s].bits(), 1U << 11);
    EXPECT_TRUE(seen.insert(masks[s].bits()).second);
    if (s > 0) {
      EXPECT_EQ(std::popcount(masks[s].bits() ^ masks[s - 1].bits()), 1);
    }
  }
}

TEST(EnumerateTest, RejectsOutOfRangeCounts) {
  EXPECT_THROW(enumerate_subsets(0), std::out_of_range);
  EXPECT_THROW(enumerate_subsets(kMaxReprs + 1), std::out_of_range);
}

TEST(GrayAccumulatorTest, TracksDirectSummationAtEveryStep) {
  const auto stack = random_stack(7, 10, 31);
  const auto stats = stack_stats(stack);
  for (FusionMode mode : {FusionMode::raw, FusionMode::normalized}) {
    GrayAccumulator acc(stack, mode, stats, 0, 10);
    // Never re-summed, so drift accumulates across all 127 steps.
    acc.assign(gray_mask(1));
    for (std::uint64_t s = 2; s < 128; ++s) {
      acc.toggle(static_cast<std::size_t>(std::countr_zero(s)));
      ASSERT_EQ(acc.mask(), gray_mask(s));
      const FusedMatrix want = mode == FusionMode::raw
                                   ? combine_raw(stack, acc.mask())
                                   : combine_normalized(stack, stats, acc.mask());
      for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t j = 0; j < 10; ++j) {
          ASSERT_NEAR(acc.row(i)[j], want.at(i, j), 1e-6);
        }
      }
    }
  }
}

TEST(SearchTest, SingleMatrixMatchesItsOwnRecall) {
  const auto stack = random_stack(1, 15, 2);
  const SearchResults r = search_all(stack, FusionMode::raw, {});
  ASSERT_EQ(r.entries.size(), 1U);
  EXPECT_EQ(r.entries[0].recall, recall_at_k(stack[0], 1).count);
}

TEST(SearchTest, DuplicatedMatricesGiveIdenticalRawRecall) {
  auto stack = random_stack(1, 20, 3);
  stack.push_back(stack[0]);
  const SearchResults r = search_all(stack, FusionMode::raw, {});
  ASSERT_EQ(r.entries.size(), 3U);
  EXPECT_EQ(r.entries[0].recall, r.entries[1].recall);
  EXPECT_EQ(r.entries[0].recall, r.entries[2].recall);

  const auto curve = best_per_size(r);
  EXPECT_EQ(curve[0].recall, curve[1].recall);
}

TEST(SearchTest, MatchesFromScratchRecomputationOnRandomStacks) {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto stack = random_stack(3, 12, seed);
    const auto stats = stack_stats(stack);
    for (FusionMode mode : {FusionMode::raw, FusionMode::normalized}) {
      const SearchResults r = search_all(stack, mode, stats);
      ASSERT_EQ(r.entries.size(), 7U);
      for (const auto& e : r.entries) {
        EXPECT_EQ(e.recall, direct_recall(stack, stats, mode, e.mask)) << e.mask.bits();
      }
    }
  }
}

TEST(SearchTest, RecallAtKMatchesDirect) {
  const auto stack = random_stack(4, 16, 44);
  const auto stats = stack_stats(stack);
  SearchOptions opts;
  opts.k = 3;
  const SearchResults r = search_all(stack, FusionMode::normalized, stats, opts);
  for (const auto& e : r.entries) {
    EXPECT_EQ(e.recall, direct_recall(stack, stats, FusionMode::normalized, e.mask, 3));
  }
}

TEST(SearchTest, KeptHitVectorsMatchDirect) {
  const auto stack = random_stack(4, 18, 45);
  const auto stats = stack_stats(stack);
  SearchOptions opts;
  opts.keep_hits = true;
  const SearchResults r = search_all(stack, FusionMode::raw, stats, opts);
  ASSERT_EQ(r.hits.size(), r.entries.size());
  for (std::size_t b = 0; b < r.entries.size(); ++b) {
    EXPECT_EQ(r.hits[b], recall_at_k(combine_raw(stack, r.entries[b].mask), 1).hits);
  }
}

TEST(SearchTest, IndependentOfWorkersAndTiling) {
  const auto stack = random_stack(6, 70, 46);
  const auto stats = stack_stats(stack);
  SearchOptions base;
  base.keep_hits = true;
  const SearchResults ref = search_all(stack, FusionMode::normalized, stats, base);
  for (unsigned workers : {2U, 4U, 8U}) {
    for (std::size_t tile : {1U, 7U, 64U, 200U}) {
      SearchOptions opts = base;
      opts.workers = workers;
      opts.tile_rows = tile;
      const SearchResults r = search_all(stack, FusionMode::normalized, stats, opts);
      EXPECT_EQ(r.entries, ref.entries);
      EXPECT_EQ(r.hits, ref.hits);
    }
  }
}

TEST(SearchTest, RefusesMoreThanTheRepresentationLimit) {
  std::vector<SimilarityMatrix> stack(kMaxReprs + 1, SimilarityMatrix{"x", 1, {1.0F}});
  EXPECT_THROW(search_all(stack, FusionMode::raw, {}), std::invalid_argument);
  EXPECT_THROW(search_all({}, FusionMode::raw, {}), std::invalid_argument);
}

TEST(SearchTest, NormalizedModeRequiresStats) {
  const auto stack = random_stack(2, 4, 1);
  EXPECT_THROW(search_all(stack, FusionMode::normalized, {}), std::invalid_argument);
}

SearchResults hand_results(std::size_t m, std::vector<std::size_t> recalls) {
  SearchResults r;
  r.m = m;
  for (std::size_t b = 1; b <= recalls.size(); ++b) {
    r.entries.push_back({SubsetMask(static_cast<std::uint32_t>(b)), recalls[b - 1]});
  }
  return r;
}

TEST(BestPerSizeTest, SingleRepresentationGivesOnePoint) {
  const auto curve = best_per_size(hand_results(1, {7}));
  ASSERT_EQ(curve.size(), 1U);
  EXPECT_EQ(curve[0].recall, 7U);
}

TEST(BestPerSizeTest, TiesGoToLowestMaskAndMaxMatchesGlobal) {
  // masks: 1:{0} 2:{1} 3:{0,1} 4:{2} 5:{0,2} 6:{1,2} 7:{0,1,2}
  const SearchResults r = hand_results(3, {5, 9, 9, 9, 11, 11, 4});
  const auto curve = best_per_size(r);
  ASSERT_EQ(curve.size(), 3U);
  EXPECT_EQ(curve[0].mask, SubsetMask(2));
  EXPECT_EQ(curve[0].recall, 9U);
  EXPECT_EQ(curve[1].mask, SubsetMask(5));
  EXPECT_EQ(curve[1].recall, 11U);
  EXPECT_EQ(curve[2].recall, 4U);

  std::size_t curve_max = 0;
  for (const auto& p : curve) {
    curve_max = std::max(curve_max, p.recall);
  }
  EXPECT_EQ(curve_max, best_overall(r).recall);
  EXPECT_EQ(best_overall(r).mask, SubsetMask(5));
}

TEST(SearchCsvTest, RoundTripsAndRejectsIncompleteFiles) {
  const std::vector<std::string> names{"conv", "ret", "shp"};
  SearchResults r = hand_results(3, {5, 9, 9, 9, 11, 11, 4});
  std::stringstream ss;
  write_search_csv(ss, r, names);
  EXPECT_NE(ss.str().find("conv+shp,2,11"), std::string::npos);
  const SearchResults back = read_search_csv(ss, FusionMode::raw, names);
  EXPECT_EQ(back.entries, r.entries);

  std::stringstream partial("subset,n_r,recall\nconv,1,5\n");
  EXPECT_THROW(read_search_csv(partial, FusionMode::raw, names), DataError);
  std::stringstream unknown("subset,n_r,recall\nfoo,1,5\n");
  EXPECT_THROW(read_search_csv(unknown, FusionMode::raw, names), DataError);
}

}  // namespace
}  // namespace simfuse
