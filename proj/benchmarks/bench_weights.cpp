// Microbenchmarks of the simplex regression core across problem sizes.
#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "sdid_event/rng.hpp"
#include "sdid_event/weights.hpp"

namespace {

struct Instance {
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;
};

Instance make_instance(int rows, int cols, std::uint64_t seed) {
  sdid::Rng rng(seed, 1);
  Instance in;
  in.features.resize(rows, cols);
  in.targets.resize(rows);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) in.features(i, j) = rng.next_normal();
    in.targets[i] = rng.next_normal();
  }
  return in;
}

void BM_SimplexRegression(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const int cols = static_cast<int>(state.range(1));
  const Instance in = make_instance(rows, cols, 7);
  for (auto _ : state) {
    auto fit = sdid::simplex_regression(in.features, in.targets, 0.05);
    benchmark::DoNotOptimize(fit.weights);
  }
}

}  // namespace

BENCHMARK(BM_SimplexRegression)
    ->Args({8, 10})
    ->Args({12, 30})
    ->Args({40, 100})
    ->Args({40, 400});

BENCHMARK_MAIN();
