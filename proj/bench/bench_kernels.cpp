/* Copyright 2026 The MEGA-ABSA Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "mega/data.hpp"
#include "mega/kernels.hpp"
#include "mega/trainer.hpp"

namespace {

using namespace mega;

std::vector<double> uniform(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = uniform(n * n, 1), b = uniform(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::gemm(kernels::Trans::kNo, kernels::Trans::kNo, {n, n, n}, a, b, c, false);
    } else {
      kernels::serial::gemm(kernels::Trans::kNo, kernels::Trans::kNo, {n, n, n}, a, b, c, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Parallel>
void BM_CausalConv(benchmark::State& state) {
  const auto steps = static_cast<std::size_t>(state.range(0));
  const std::size_t channels = 64, width = 4;
  const auto x = uniform(steps * channels, 3), kernel = uniform(width * channels, 4),
             bias = uniform(channels, 5);
  std::vector<double> out(steps * channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::causal_conv1d(x, kernel, bias, steps, channels, width, out);
    } else {
      kernels::serial::causal_conv1d(x, kernel, bias, steps, channels, width, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

// One mini-batch gradient of a small model on synthetic sentences; the
// argument is the OpenMP thread count.
void BM_BatchGradient(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  std::vector<AspectExample> corpus;
  std::mt19937_64 rng(9);
  for (int i = 0; i < 16; ++i) {
    AspectExample ex;
    ex.source_id = "b" + std::to_string(i);
    for (int t = 0; t < 20; ++t) ex.tokens.push_back("w" + std::to_string(rng() % 50));
    ex.aspect = Span{3, 5};
    ex.label = static_cast<Polarity>(i % 3);
    corpus.push_back(ex);
  }
  const Vocab vocab = Vocab::build(corpus);
  RunConfig cfg;
  cfg.model.embed_dim = 32;
  cfg.model.d_model = 32;
  MegaModel model(cfg.model, vocab, random_embeddings(vocab.size(), 32, 1), 1);
  Trainer trainer(model, cfg);
  const auto data = encode_all(corpus, vocab);
  GradientMap grads;
  for (auto _ : state) benchmark::DoNotOptimize(trainer.batch_gradient(data, 11, grads));
  omp_set_num_threads(omp_get_num_procs());
}

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(BM_CausalConv<false>)->Name("conv/serial")->Arg(64)->Arg(1024);
BENCHMARK(BM_CausalConv<true>)->Name("conv/parallel")->Arg(64)->Arg(1024);
BENCHMARK(BM_BatchGradient)->Name("batch_gradient/threads")->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
