// SPDX-License-Identifier: Apache-2.0
// Compares the serial and OpenMP matrix kernels and times a full model
// forward/backward pass at training dimensions.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ssran/autograd.hpp"
#include "ssran/kernels.hpp"
#include "ssran/losses.hpp"
#include "ssran/model.hpp"
#include "ssran/rng.hpp"

namespace {

std::vector<double> random_mat(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = 2.0 * ssran::unit_uniform(rng) - 1.0;
  return v;
}

void bm_gemm_serial(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto a = random_mat(n * n, 1), b = random_mat(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    ssran::kernels::serial::gemm_nn(a.data(), b.data(), c.data(), n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n * n * n));
}

void bm_gemm_parallel(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto a = random_mat(n * n, 1), b = random_mat(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    ssran::kernels::par::gemm_nn(a.data(), b.data(), c.data(), n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n * n * n));
}

void bm_forward_backward(benchmark::State& state) {
  ssran::ModelConfig cfg;
  cfg.vocab_size = 100;
  cfg.num_slots = 12;
  cfg.num_intents = 5;
  cfg.dropout = 0.0;
  ssran::Model model(cfg, 7);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<int> ids(n);
  for (std::size_t j = 0; j < n; ++j) ids[j] = static_cast<int>(2 + j % 90);
  ssran::Mask mask(n, 1);
  std::vector<int> slot_ids(n, 3), chunk_ids(n, 0);
  std::vector<double> hot(cfg.num_intents, 0.0);
  hot[1] = hot[3] = 1.0;
  for (auto _ : state) {
    for (auto& [name, p] : model.params()) p->zero_grad();
    auto out = model.forward(ids, mask);
    auto parts = ssran::utterance_loss(out, slot_ids, hot, 1, chunk_ids, mask, 0.65, 0.3);
    ssran::backward(parts.total);
    benchmark::DoNotOptimize(parts.total->value.item());
  }
}

}  // namespace

BENCHMARK(bm_gemm_serial)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_gemm_parallel)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_forward_backward)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
