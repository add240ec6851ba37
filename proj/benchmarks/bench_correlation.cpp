#include <benchmark/benchmark.h>

#include "saelab/correlation.hpp"
#include "saelab/rng.hpp"

using namespace saelab;

namespace {

void series(std::size_t n, bool ties, std::vector<double>& x, std::vector<double>& y) {
  Rng rng(7);
  x.resize(n);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = ties ? static_cast<double>(rng.below(11)) : rng.normal();
    y[i] = x[i] + (ties ? static_cast<double>(rng.below(3)) : rng.normal());
  }
}

void BM_Kendall(benchmark::State& state) {
  std::vector<double> x, y;
  series(static_cast<std::size_t>(state.range(0)), state.range(1) != 0, x, y);
  for (auto _ : state) benchmark::DoNotOptimize(kendall_tau_b(x, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Kendall)->ArgsProduct({{1 << 8, 1 << 12, 1 << 16}, {0, 1}})->Complexity(benchmark::oNLogN);

void BM_Pearson(benchmark::State& state) {
  std::vector<double> x, y;
  series(static_cast<std::size_t>(state.range(0)), false, x, y);
  for (auto _ : state) benchmark::DoNotOptimize(pearson(x, y));
}
BENCHMARK(BM_Pearson)->Arg(1 << 12)->Arg(1 << 16);

}  // namespace
