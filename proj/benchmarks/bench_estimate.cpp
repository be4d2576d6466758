// End-to-end benchmarks: full estimation and the clustered bootstrap.
#include <benchmark/benchmark.h>

#include "sdid_event/dgp.hpp"
#include "sdid_event/estimators.hpp"
#include "sdid_event/inference.hpp"

namespace {

sdid::PanelDataset make_panel(int n_controls, int cohort_size, int periods) {
  sdid::DGPSpec spec;
  spec.n_controls = n_controls;
  spec.cohorts = {{periods / 2, cohort_size, {1.0, 0.5}},
                  {periods / 2 + 2, cohort_size, {0.8}}};
  spec.n_periods = periods;
  spec.sd_unit = 0.5;
  spec.sd_time = 0.3;
  spec.sd_noise = 0.4;
  spec.seed = 99;
  return sdid::generate(spec).panel;
}

void BM_Estimate(benchmark::State& state) {
  const auto panel = make_panel(static_cast<int>(state.range(0)),
                                static_cast<int>(state.range(1)),
                                static_cast<int>(state.range(2)));
  for (auto _ : state) {
    auto result = sdid::estimate(panel);
    benchmark::DoNotOptimize(result.att);
  }
}

void BM_Bootstrap(benchmark::State& state) {
  const auto panel = make_panel(20, 4, 10);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto v = sdid::bootstrap_se(panel, {}, 50, 11, threads);
    benchmark::DoNotOptimize(v.se_att);
  }
}

}  // namespace

BENCHMARK(BM_Estimate)->Args({10, 3, 8})->Args({40, 8, 12})->Args({120, 20, 20});
BENCHMARK(BM_Bootstrap)->Arg(1)->Arg(2);

BENCHMARK_MAIN();
