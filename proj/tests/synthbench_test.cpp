#include "simfuse/synthbench.hpp"

#include <gtest/gtest.h>

#include <numeric>

#include "simfuse/analysis.hpp"
#include "simfuse/error.hpp"
#include "test_util.hpp"

namespace simfuse {
namespace {

std::vector<std::size_t> range(std::size_t b, std::size_t e) {
  std::vector<std::size_t> v(e - b);
  std::iota(v.begin(), v.end(), b);
  return v;
}

SearchResults run_search(const PairedGallery& g, FusionMode mode) {
  const auto stack = similarity_stack(g);
  const auto stats = stack_stats(stack);
  return search_all(stack, mode, stats);
}

TEST(SynthGalleryTest, ExactCopiesAreAllRetrieved) {
  SynthSpec spec{50, 1, 16, {range(0, 50)}, 0.0, 3, {}};
  const PairedGallery g = generate_gallery(spec);
  EXPECT_EQ(g.representations, std::vector<std::string>{"r00"});
  EXPECT_EQ(g.left[0].rows, g.right[0].rows);
  EXPECT_EQ(run_search(g, FusionMode::raw).recall_of(SubsetMask(1)), 50U);
}

TEST(SynthGalleryTest, NoSignalIsNearChance) {
  SynthSpec spec{200, 1, 64, {{}}, 0.0, 1, {}};
  const auto stack = similarity_stack(generate_gallery(spec));
  EXPECT_LE(recall_at_k(stack[0], 1).count, 5U);
}

TEST(SynthGalleryTest, DisjointHalvesFuseToFullRecall) {
  const PairedGallery g = generate_gallery(SynthSpec::disjoint_halves(200, 512, 1));
  const auto stack = similarity_stack(g);
  const HitSets h = hit_sets(stack);
  EXPECT_EQ(h.count(0), 100U);
  EXPECT_EQ(h.count(1), 100U);
  EXPECT_EQ(oracle_recall(h), 200U);
  EXPECT_EQ(run_search(g, FusionMode::normalized).recall_of(SubsetMask(3)), 200U);
}

TEST(SynthGalleryTest, SignalPairsAreHitsWithoutNoise) {
  SynthSpec spec{60, 3, 32, {range(0, 20), range(10, 40), {}}, 0.0, 5, {"a", "b", "c"}};
  const auto stack = similarity_stack(generate_gallery(spec));
  for (std::size_t m = 0; m < 3; ++m) {
    const auto hits = recall_at_k(stack[m], 1).hits;
    for (std::size_t i : spec.signal[m]) EXPECT_TRUE(hits[i]) << m << " " << i;
  }
}

TEST(SynthGalleryTest, SameSeedIsDeterministic) {
  SynthSpec spec{30, 2, 8, {range(0, 10), range(5, 30)}, 0.3, 99, {}};
  const PairedGallery a = generate_gallery(spec);
  const PairedGallery b = generate_gallery(spec);
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_EQ(a.left[m].rows, b.left[m].rows);
    EXPECT_EQ(a.right[m].rows, b.right[m].rows);
  }
  spec.seed = 100;
  EXPECT_NE(generate_gallery(spec).left[0].rows, a.left[0].rows);
}

TEST(SynthGalleryTest, WrittenFilesAreByteIdentical) {
  testing::TempDir d1, d2;
  const SynthSpec spec{20, 2, 4, {range(0, 20), {}}, 0.1, 4, {}};
  write_synth_gallery(spec, d1.path());
  write_synth_gallery(spec, d2.path());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(d1.path())) {
    EXPECT_EQ(testing::slurp(e.path()), testing::slurp(d2 / e.path().filename().string()));
    ++files;
  }
  EXPECT_GT(files, 0U);
  const PairedGallery back = load_gallery(d1 / "gallery.json");
  EXPECT_EQ(back.left[0].rows, generate_gallery(spec).left[0].rows);
}

TEST(SynthGalleryTest, InvalidSpecsThrow) {
  EXPECT_THROW(check_synth_spec(SynthSpec{0, 1, 4, {{}}, 0.0, 1, {}}), std::invalid_argument);
  EXPECT_THROW(check_synth_spec(SynthSpec{10, 1, 4, {{10}}, 0.0, 1, {}}), std::invalid_argument);
  EXPECT_THROW(check_synth_spec(SynthSpec{10, 2, 4, {{}}, 0.0, 1, {}}), std::invalid_argument);
  EXPECT_THROW(check_synth_spec(SynthSpec{10, 1, 4, {{}}, -1.0, 1, {}}), std::invalid_argument);
}

TEST(SynthSpecFileTest, RoundTripAndSignalForms) {
  testing::TempDir dir;
  const SynthSpec spec{12, 2, 3, {range(0, 12), {1, 5}}, 0.25, 42, {"x", "y"}};
  write_synth_spec(spec, dir / "s.json");
  const SynthSpec back = read_synth_spec(dir / "s.json");
  EXPECT_EQ(back.signal, spec.signal);
  EXPECT_EQ(back.repr_names, spec.repr_names);
  EXPECT_EQ(back.seed, 42U);
  EXPECT_EQ(read_synth_kind(dir / "s.json"), SynthKind::gallery);

  std::ofstream(dir / "t.json") << R"({"n_pairs": 6, "n_reprs": 3, "dim": 2, "seed": 1,
      "noise_sigma": 0, "signal_assignment": ["all", "none", {"begin": 2, "end": 4}]})";
  const SynthSpec t = read_synth_spec(dir / "t.json");
  EXPECT_EQ(t.signal[0], range(0, 6));
  EXPECT_TRUE(t.signal[1].empty());
  EXPECT_EQ(t.signal[2], range(2, 4));
}

TEST(SynthSpecFileTest, MalformedJsonIsADataError) {
  testing::TempDir dir;
  std::ofstream(dir / "bad.json") << R"({"n_pairs": 6,, })";
  try {
    read_synth_spec(dir / "bad.json");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos) << e.what();
  }
}

TEST(BruteForceTest, AgreesWithThePipeline) {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    SynthSpec spec;
    spec.n_pairs = 5 + rng.below(40);
    spec.n_reprs = 1 + rng.below(4);
    spec.dim = 2 + rng.below(10);
    spec.noise_sigma = rng.uniform();
    spec.seed = rng.next_u64();
    for (std::size_t m = 0; m < spec.n_reprs; ++m) {
      spec.signal.push_back(range(0, rng.below(spec.n_pairs + 1)));
    }
    const PairedGallery g = generate_gallery(spec);
    for (FusionMode mode : {FusionMode::raw, FusionMode::normalized}) {
      const SearchResults r = run_search(g, mode);
      for (const auto& e : r.entries) {
        EXPECT_EQ(e.recall, brute_force_recall(g, e.mask, mode))
            << to_string(mode) << " " << e.mask.bits();
      }
    }
  }
}

TEST(BruteForceTest, LargeGalleryThrows) {
  const PairedGallery g = generate_gallery(SynthSpec{257, 1, 2, {{}}, 0.0, 1, {}});
  EXPECT_THROW(brute_force_recall(g, SubsetMask(1), FusionMode::raw), std::invalid_argument);
}

const std::vector<LayerShape> kLayers{{4, 4, 4}, {3, 3, 6}, {2, 2, 8}, {2, 2, 4}, {1, 1, 16}};

TEST(Synth2AfcTest, PlantedLayerWins) {
  const auto items = generate_2afc_items(100, kLayers, 2, 21);
  const SingleLayerResult r = best_single_layer(items);
  EXPECT_EQ(r.best_layer, 2U);
  EXPECT_GE(r.best_score, 0.9 - 1e-12);
}

TEST(Synth2AfcTest, DeterministicAndNormalized) {
  const auto a = generate_2afc_items(5, kLayers, 0, 8);
  const auto b = generate_2afc_items(5, kLayers, 0, 8);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].p0, b[i].p0);
    EXPECT_EQ(a[i].p1, b[i].p1);
    EXPECT_TRUE(a[i].human_pref == 0.9 || a[i].human_pref == 0.1);
  }
  const auto& layer = a[0].ref.layers[1];
  for (std::size_t y = 0; y < layer.shape.h; ++y) {
    for (std::size_t x = 0; x < layer.shape.w; ++x) {
      double sq = 0.0;
      for (float v : layer.at(y, x)) sq += static_cast<double>(v) * v;
      EXPECT_NEAR(sq, 1.0, 1e-5);
    }
  }
}

TEST(Synth2AfcTest, InvalidArgumentsThrow) {
  EXPECT_THROW(generate_2afc_items(0, kLayers, 0, 1), std::invalid_argument);
  EXPECT_THROW(generate_2afc_items(3, kLayers, 5, 1), std::invalid_argument);
}

}  // namespace
}  // namespace simfuse
