#include "adaptsde/martingale.hpp"

#include <benchmark/benchmark.h>

using namespace adaptsde;

static void BM_MartingaleStudy(benchmark::State& state) {
  const PolicySpec policy{VariancePolicy::StateDependent, 1.0};
  const std::size_t paths = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(martingale_study(policy, 1000, paths, {{1.0, 2.0}, {2.0, 2.0}}, 1, 1));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_MartingaleStudy)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
