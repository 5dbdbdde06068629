// Serial reference against the OpenMP paths. Both produce identical output
// (per-item RNG streams), so only wall time differs.

#include <benchmark/benchmark.h>

#include "trapclust/detector.hpp"
#include "trapclust/eval.hpp"
#include "trapclust/partitioner.hpp"
#include "trapclust/synth.hpp"

namespace tc = trapclust;

namespace {

const tc::PlantedGraph& mickee() {
  static const tc::PlantedGraph pg = [] {
    tc::MickeeSpec spec;
    spec.seed = 1;
    return tc::generate_mickee(spec);
  }();
  return pg;
}

tc::Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? tc::Execution::kSerial : tc::Execution::kParallel;
}

void BM_DetectRestarts(benchmark::State& state) {
  const tc::PoissonContext ctx(mickee().graph);
  tc::DetectorConfig cfg;
  cfg.k = 80;
  cfg.restarts = 8;
  cfg.epsilon_scale = 1000.0;
  cfg.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(tc::detect(ctx, cfg).energy);
}

void BM_MonteCarlo(benchmark::State& state) {
  const auto& pg = mickee();
  tc::MonteCarloOptions opts;
  opts.walks_per_node = 200;
  opts.execution = mode(state);
  const tc::NodeSet set = pg.group(0);
  for (auto _ : state) benchmark::DoNotOptimize(tc::monte_carlo_met(pg.graph, set, opts).tau_hat);
}

void BM_PartitionRestarts(benchmark::State& state) {
  const tc::PoissonContext ctx(mickee().graph);
  tc::PartitionerConfig cfg;
  cfg.K = 4;
  cfg.restarts = 4;
  cfg.init = tc::PartitionInit::kSpectral;
  cfg.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(tc::partition(ctx, cfg).energy);
}

}  // namespace

// Arg 0 = serial, 1 = OpenMP.
BENCHMARK(BM_DetectRestarts)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarlo)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PartitionRestarts)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
