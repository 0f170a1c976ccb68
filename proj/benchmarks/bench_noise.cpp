#include "adaptsde/noise.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace adaptsde;

static void BM_Gaussian(benchmark::State& state) {
  NoiseStream s(1, 0);
  std::vector<double> buf(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    s.fill_gaussian(buf);
    benchmark::DoNotOptimize(buf.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Gaussian)->Arg(2)->Arg(1024);

static void BM_BrownianRefine(benchmark::State& state) {
  for (auto _ : state) {
    BrownianPath w(2, NoiseStream(3, 0));
    double t = 1.0;
    for (int i = 0; i < state.range(0); ++i) {
      benchmark::DoNotOptimize(w.at(t));
      t *= 0.5;
    }
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BrownianRefine)->Arg(16)->Arg(256);
