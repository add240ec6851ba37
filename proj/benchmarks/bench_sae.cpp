#include <benchmark/benchmark.h>

#include "saelab/rng.hpp"
#include "saelab/sae.hpp"

using namespace saelab;

namespace {

struct Fixture {
  SaeConfig config;
  SaeParams params;
  Matrix<float> data;

  Fixture(std::size_t D, double expansion, std::size_t k, std::size_t rows) {
    config = SaeConfig::with_expansion(D, expansion, k);
    config.seed = 1;
    params = init_params(config);
    data = Matrix<float>(rows, D);
    Rng rng(2);
    for (auto& v : data.storage()) v = static_cast<float>(rng.normal());
  }
};

void BM_Encode(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)), 8, 32, 64);
  std::size_t r = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode(f.data.row(r), f.params, f.config.topk));
    r = (r + 1) % f.data.rows();
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Encode)->Arg(64)->Arg(256)->Arg(1024);

void BM_Decode(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)), 8, 32, 16);
  const auto h = encode(f.data.row(0), f.params, f.config.topk);
  for (auto _ : state) benchmark::DoNotOptimize(decode(h, f.params));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Decode)->Arg(64)->Arg(256)->Arg(1024);

void BM_TrainingStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const Fixture f(128, 8, 32, batch);
  std::vector<std::size_t> rows(batch);
  for (std::size_t i = 0; i < batch; ++i) rows[i] = i;
  BasicGradients<float> g;
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_and_gradient(f.params, f.data, rows, f.config.topk, {}, &g));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TrainingStep)->Arg(32)->Arg(256);

}  // namespace
