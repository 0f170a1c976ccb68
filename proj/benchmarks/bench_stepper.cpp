#include "adaptsde/method_pair.hpp"
#include "adaptsde/problem.hpp"
#include "adaptsde/stepper.hpp"

#include <benchmark/benchmark.h>

using namespace adaptsde;

namespace {

MethodPair pair_for(int which) {
  switch (which) {
    case 0: return euler_pair(make_cubic_gradient(2));
    case 1: return euler_pair(make_langevin());
    default: return symplectic_pair(default_langevin_spec());
  }
}

}  // namespace

// Adaptive steps per second over one path segment.
static void BM_RunPath(benchmark::State& state) {
  const MethodPair pair = pair_for(static_cast<int>(state.range(0)));
  StepperConfig c;
  c.tol = 0.01;
  std::size_t steps = 0;
  std::uint64_t path = 0;
  for (auto _ : state) {
    NoiseStream s(7, path++);
    const Trajectory tr = run_path(Vector::Constant(pair.dim, 0.5), c, pair, &s, 10.0, false);
    steps += tr.step_count;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(steps));
  state.SetLabel(pair.label);
}
BENCHMARK(BM_RunPath)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

static void BM_SelectK(benchmark::State& state) {
  const MethodPair pair = euler_pair(make_cubic_gradient(static_cast<int>(state.range(0))));
  StepperConfig c;
  c.tol = 0.01;
  const Vector x = Vector::Constant(pair.dim, 1.3);
  for (auto _ : state) benchmark::DoNotOptimize(select_k(c, pair, x, 0));
}
BENCHMARK(BM_SelectK)->Arg(1)->Arg(3);
