// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "islt/mollify.hpp"
#include "islt/simulate.hpp"

using namespace islt;

namespace {

// Occupation of one surviving path, densified: a realistic sparse input for the smoother.
GridMeasure sample_occupation(const GridPtr& grid) {
  const DomainSpec dom = DomainSpec::unit_box(2, 1);
  PathConfig pc;
  pc.dt = 1e-4;
  pc.t = 0.2;
  for (std::uint64_t s = 0;; ++s) {
    pc.seed = s;
    const PathResult path = sample_paths(dom, *grid, pc);
    if (path.all_survived()) return path.motions[0].occupation.to_dense(grid);
  }
}

void BM_SmoothReference(benchmark::State& state) {
  const GridPtr grid = make_grid(DomainSpec::unit_box(2, 1), static_cast<int>(state.range(0)));
  const GridMeasure occ = sample_occupation(grid);
  const MollifierSpec spec{0.1, MollifierProfile::bump};
  for (auto _ : state) benchmark::DoNotOptimize(smooth_occupation_reference(occ, spec));
}

void BM_SmoothBanded(benchmark::State& state) {
  const GridPtr grid = make_grid(DomainSpec::unit_box(2, 1), static_cast<int>(state.range(0)));
  const GridMeasure occ = sample_occupation(grid);
  const MollifierSpec spec{0.1, MollifierProfile::bump};
  const int workers = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(smooth_occupation(occ, spec, workers));
}

PathConfig ensemble_config() {
  PathConfig pc;
  pc.dt = 1e-3;
  pc.t = 0.2;
  pc.seed = 11;
  return pc;
}

const RowFn kTotals = [](std::size_t, const PathResult& path, double* out) {
  out[0] = path.motions[0].occupation.total();
  out[1] = path.motions[1].occupation.total();
};

void BM_EnsembleSerial(benchmark::State& state) {
  const DomainSpec dom = DomainSpec::unit_box(2, 2);
  const Grid grid(dom, 64);
  for (auto _ : state)
    benchmark::DoNotOptimize(run_ensemble_serial(dom, grid, ensemble_config(), 256, 2, kTotals));
}

void BM_EnsembleParallel(benchmark::State& state) {
  const DomainSpec dom = DomainSpec::unit_box(2, 2);
  const Grid grid(dom, 64);
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(run_ensemble(dom, grid, ensemble_config(), 256, 2, kTotals, workers));
}

}  // namespace

BENCHMARK(BM_SmoothReference)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SmoothBanded)->Args({64, 1})->Args({128, 1})->Args({128, 0})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnsembleSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnsembleParallel)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
