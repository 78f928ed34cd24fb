#include <benchmark/benchmark.h>

#include <vector>

#include "veml/coreset.hpp"
#include "veml/gromov_wasserstein.hpp"
#include "veml/repository.hpp"
#include "veml/similarity.hpp"

using namespace veml;

namespace {

std::vector<GaussianCluster> origin(std::size_t d, double shift = 0.0) {
  std::vector<double> mean(d, 0.0);
  mean[0] = shift;
  return {{mean, 1.0}};
}

void BM_KCenterGreedy(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = synth_matrix(n, 512, 1, origin(512));
  for (auto _ : state) benchmark::DoNotOptimize(kcenter_greedy(m, kImageCoresetK, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_KCenterGreedy)->Arg(1'000)->Arg(10'000)->Unit(benchmark::kMillisecond);

// Coreset distance against the full-data mean over all pairs it stands in for.
void BM_CoresetDistance(benchmark::State& state) {
  const auto a = kcenter_greedy(synth_matrix(2'000, 512, 1, origin(512)), kImageCoresetK, 1);
  const auto b = kcenter_greedy(synth_matrix(2'000, 512, 2, origin(512, 10)), kImageCoresetK, 1);
  for (auto _ : state) benchmark::DoNotOptimize(coreset_distance(a, b));
}
BENCHMARK(BM_CoresetDistance);

void BM_FullDataDistance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = synth_matrix(n, 512, 1, origin(512));
  const auto b = synth_matrix(n, 512, 2, origin(512, 10));
  for (auto _ : state) benchmark::DoNotOptimize(fulldata_distance(a, b));
}
BENCHMARK(BM_FullDataDistance)->Arg(500)->Arg(2'000)->Unit(benchmark::kMillisecond);

void BM_GromovWasserstein(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto a = kcenter_greedy(synth_matrix(2'000, 64, 1, origin(64)), k, 1);
  const auto b = kcenter_greedy(synth_matrix(2'000, 32, 2, origin(32, 3)), k, 2);
  for (auto _ : state) benchmark::DoNotOptimize(gw_distance(a, b));
}
BENCHMARK(BM_GromovWasserstein)->Arg(10)->Arg(kSpatiotemporalCoresetK)->Unit(benchmark::kMillisecond);

void BM_StoreAppend(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  std::vector<Blob> payloads(batch, Blob(256, 0x5a));
  auto repo = Repository::in_memory();
  for (auto _ : state) benchmark::DoNotOptimize(repo->store().add_samples(payloads));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_StoreAppend)->Arg(100)->Arg(1'000);

}  // namespace

BENCHMARK_MAIN();
