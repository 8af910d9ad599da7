#include <benchmark/benchmark.h>

#include <vector>

#include "grokscale/adamw.hpp"
#include "grokscale/kernels.hpp"
#include "grokscale/observables.hpp"
#include "grokscale/random.hpp"
#include "grokscale/task_data.hpp"
#include "grokscale/transformer.hpp"

using namespace grokscale;

namespace {

std::vector<float> random_matrix(std::size_t n, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  std::vector<float> out(n);
  for (auto& v : out) v = static_cast<float>(rng.normal());
  return out;
}

void BM_gemm_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n * n, 1), b = random_matrix(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    kernels::serial::gemm_nn<float>(n, n, n, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

void BM_gemm_tiled(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  kernels::set_kernel_threads(static_cast<int>(state.range(1)));
  const auto a = random_matrix(n * n, 1), b = random_matrix(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    kernels::gemm_nn<float>(n, n, n, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
  kernels::set_kernel_threads(1);
}

void BM_train_step(benchmark::State& state) {
  kernels::set_kernel_threads(static_cast<int>(state.range(0)));
  ModelConfig config;
  config.vocab = 53;
  auto params = init_model<float>(config);
  auto grads = zeros_like(params);
  auto adam = make_adam_state(params);
  OptimConfig optim;
  const auto pairs = enumerate_pairs(53, Operation::add);
  const std::vector<LabeledPair> batch(pairs.begin(), pairs.begin() + optim.batch_size);
  TransformerWorkspace<float> ws(config);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ws.loss_and_grads(params, batch, grads));
    adamw_step(params, grads, adam, optim);
  }
  state.SetItemsProcessed(state.iterations() * optim.batch_size);
  kernels::set_kernel_threads(1);
}

void BM_probe_spectrum(benchmark::State& state) {
  const std::size_t n = 1400, d = 128;
  const auto rows = random_matrix(n * d, 3);
  const std::vector<double> x(rows.begin(), rows.end());
  for (auto _ : state) benchmark::DoNotOptimize(probe_spectrum(x, n, d));
}

}  // namespace

BENCHMARK(BM_gemm_serial)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_gemm_tiled)->Args({128, 1})->Args({256, 1})->Args({256, 2})->Args({256, 4})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_train_step)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_probe_spectrum)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
