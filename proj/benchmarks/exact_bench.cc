#include <benchmark/benchmark.h>

#include "unishap/exact.h"

namespace {

void BM_ExactBruteforce(benchmark::State& state) {
  auto game = unishap::RandomTabularGame(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(unishap::ExactBruteforce(*game));
}
BENCHMARK(BM_ExactBruteforce)->DenseRange(8, 20, 4)->Unit(benchmark::kMillisecond);

void BM_ExactRegression(benchmark::State& state) {
  auto game = unishap::RandomTabularGame(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(unishap::ExactRegression(*game, 0.0));
}
BENCHMARK(BM_ExactRegression)->DenseRange(8, 16, 4)->Unit(benchmark::kMillisecond);

}  // namespace
