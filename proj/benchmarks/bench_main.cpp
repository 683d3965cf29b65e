#include <benchmark/benchmark.h>

#include "simfuse/fusion_search.hpp"
#include "simfuse/patch_metric.hpp"
#include "simfuse/synthbench.hpp"

namespace {

using namespace simfuse;

SynthSpec bench_spec(std::size_t n, std::size_t m, std::size_t dim) {
  SynthSpec spec{n, m, dim, {}, 0.5, 11, {}};
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<std::size_t> sig;
    for (std::size_t i = k; i < n; i += m) sig.push_back(i);
    spec.signal.push_back(sig);
  }
  return spec;
}

void BM_CosineMatrix(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PairedGallery g = generate_gallery(bench_spec(n, 1, 512));
  for (auto _ : state) {
    benchmark::DoNotOptimize(cosine_similarity_matrix(g.left[0], g.right[0]));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_CosineMatrix)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_SearchAll(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const PairedGallery g = generate_gallery(bench_spec(256, m, 32));
  const auto stack = similarity_stack(g);
  const auto stats = stack_stats(stack);
  for (auto _ : state) {
    benchmark::DoNotOptimize(search_all(stack, FusionMode::normalized, stats));
  }
  state.SetItemsProcessed(state.iterations() * ((std::int64_t{1} << m) - 1));
}
BENCHMARK(BM_SearchAll)->Arg(6)->Arg(9)->Unit(benchmark::kMillisecond);

void BM_WeightedDistance(benchmark::State& state) {
  const std::vector<LayerShape> shapes{{32, 32, 64}, {16, 16, 128}, {8, 8, 256}};
  const auto items = generate_2afc_items(1, shapes, 0, 3);
  const LayerWeights w = LayerWeights::uniform(shapes);
  for (auto _ : state) {
    benchmark::DoNotOptimize(weighted_layer_distance(items[0].ref, items[0].p0, w));
  }
}
BENCHMARK(BM_WeightedDistance);

}  // namespace

BENCHMARK_MAIN();
