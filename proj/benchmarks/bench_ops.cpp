// Microbenchmarks for the hot autodiff ops: forward cost alone and the full
// forward+backward round trip that one training step pays per op.

#include <benchmark/benchmark.h>

#include "e4g/losses.hpp"
#include "e4g/model.hpp"
#include "e4g/rng.hpp"
#include "e4g/tensor.hpp"

namespace {

using namespace e4g;

Tensor<float> random_tensor(const Shape& shape, Rng& rng) {
  Tensor<float> t = Tensor<float>::zeros(shape);
  for (float& v : t.values()) v = float(rng.normal());
  return t;
}

void BM_conv1d_forward(benchmark::State& state) {
  Rng rng(1);
  const Tensor<float> x = random_tensor({5, 1250}, rng);
  const Tensor<float> w = random_tensor({7, 5, 4}, rng);
  const Tensor<float> b = random_tensor({7}, rng);
  Tape<float> tape(false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv1d(tape, x, w, b, 1, 2));
  }
}
BENCHMARK(BM_conv1d_forward);

void BM_conv1d_backward(benchmark::State& state) {
  Rng rng(1);
  for (auto _ : state) {
    Tape<float> tape(true);
    Tensor<float> x = random_tensor({5, 1250}, rng);
    Tensor<float> w = random_tensor({7, 5, 4}, rng);
    Tensor<float> b = random_tensor({7}, rng);
    x.ensure_grad();
    w.ensure_grad();
    b.ensure_grad();
    Tensor<float> y = conv1d(tape, x, w, b, 1, 2);
    Tensor<float> loss = sum(tape, y);
    tape.backward(loss);
    benchmark::DoNotOptimize(w.grad()[0]);
  }
}
BENCHMARK(BM_conv1d_backward);

void BM_maxpool_forward(benchmark::State& state) {
  Rng rng(2);
  const Tensor<float> x = random_tensor({16, 2500}, rng);
  Tape<float> tape(false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(maxpool1d(tape, x, 2, 2));
  }
}
BENCHMARK(BM_maxpool_forward);

void BM_batchnorm_train(benchmark::State& state) {
  Rng rng(3);
  const Tensor<float> x = random_tensor({8, 16, 156}, rng);
  const Tensor<float> gamma = Tensor<float>::full({16}, 1.0f);
  const Tensor<float> beta = Tensor<float>::zeros({16});
  BatchNormState<float> bn = BatchNormState<float>::init(16);
  Tape<float> tape(false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        batchnorm1d(tape, x, gamma, beta, bn, RunMode::train, 0.1f, 1e-5f));
  }
}
BENCHMARK(BM_batchnorm_train);

void BM_softmax_cross_entropy(benchmark::State& state) {
  Rng rng(4);
  const Tensor<float> logits = random_tensor({2, 2500}, rng);
  LabelMask labels(2500);
  for (auto& v : labels) v = uint8_t(rng.uniform_int(0, 1));
  Tape<float> tape(false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cross_entropy(tape, logits, labels));
  }
}
BENCHMARK(BM_softmax_cross_entropy);

}  // namespace
