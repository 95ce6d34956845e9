// Whole-network inference benchmarks: the single-pass cost of each variant on
// one 10 s window, plus the sampled mcdrop ensemble for comparison.

#include <benchmark/benchmark.h>

#include "e4g/model.hpp"
#include "e4g/rng.hpp"
#include "e4g/tensor.hpp"

namespace {

using namespace e4g;

Tensor<float> random_window(Rng& rng) {
  Tensor<float> x = Tensor<float>::zeros({1, 2500});
  for (float& v : x.values()) v = float(rng.normal());
  return x;
}

void bench_forward(benchmark::State& state, Variant variant, RunMode mode,
                   size_t passes) {
  Rng rng(7);
  ModelGraph<float> model = build_model<float>(ModelConfig::for_variant(variant), rng);
  const Tensor<float> x = random_window(rng);
  Tape<float> tape(false);
  size_t pass = 0;
  for (auto _ : state) {
    Rng fw_rng(pass++);
    for (size_t i = 0; i < passes; ++i) {
      benchmark::DoNotOptimize(forward(model, tape, x, mode, fw_rng));
    }
  }
}

void BM_forward_vanilla(benchmark::State& state) {
  bench_forward(state, Variant::vanilla, RunMode::eval, 1);
}
BENCHMARK(BM_forward_vanilla);

void BM_forward_early_exit(benchmark::State& state) {
  bench_forward(state, Variant::early_exit, RunMode::eval, 1);
}
BENCHMARK(BM_forward_early_exit);

void BM_forward_mcdrop_5(benchmark::State& state) {
  bench_forward(state, Variant::mcdrop, RunMode::eval_sampling, 5);
}
BENCHMARK(BM_forward_mcdrop_5);

}  // namespace

BENCHMARK_MAIN();
