#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "affect/metrics.hpp"
#include "affect/postprocess.hpp"
#include "affect/prng.hpp"
#include "affect/svr.hpp"

using namespace affect;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Prng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void BM_Ccc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = noise(n, 1), g = noise(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ccc(p, g));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ccc)->Arg(1500)->Arg(7500)->Arg(67500);

void BM_MedianFilter(benchmark::State& state) {
  const auto x = noise(7500, 3);
  const double window_s = static_cast<double>(state.range(0)) / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(median_filter(x, window_s, kDefaultFramePeriod));
  state.SetItemsProcessed(state.iterations() * 7500);
}
BENCHMARK(BM_MedianFilter)->Arg(4)->Arg(20)->Arg(80);

void BM_TrainSvr(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const bool rbf = state.range(1) != 0;
  Prng rng(4);
  Matrix x(n, 8);
  std::vector<double> y(n);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 8; ++c) {
      x(r, c) = rng.normal();
      s += x(r, c) * (c % 3 == 0 ? 0.3 : -0.1);
    }
    y[r] = std::tanh(s) + 0.1 * rng.normal();
  }
  const SvrHyperParams hyper{0.1, 0.1, rbf ? Kernel::rbf(0.125) : Kernel::linear()};
  for (auto _ : state) benchmark::DoNotOptimize(train_svr(x, y, hyper));
}
BENCHMARK(BM_TrainSvr)->Args({500, 0})->Args({2000, 0})->Args({500, 1})->Args({2000, 1})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
