#include <benchmark/benchmark.h>

#include "qcnn/network.hpp"
#include "qcnn/training.hpp"

namespace {

using namespace qcnn;

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.normal();
  return m;
}

// Full-size model: d=300, heights 2..5, F=100, N=128.
struct Setup {
  explicit Setup(std::size_t tokens) {
    Rng rng(1);
    ModelShape shape;
    model = init_model(shape, rng);
    sentence.values = random_matrix(rng, tokens, shape.dim);
  }
  QcnnModel model;
  SentenceMatrix sentence;
};

void BM_WideConvolve(benchmark::State& state) {
  Rng rng(2);
  const auto s = random_matrix(rng, static_cast<std::size_t>(state.range(0)), 300);
  const auto k = random_matrix(rng, 3, 300);
  for (auto _ : state) benchmark::DoNotOptimize(wide_convolve(s, k, 0.1));
}
BENCHMARK(BM_WideConvolve)->Arg(10)->Arg(40);

void BM_Forward(benchmark::State& state) {
  Setup setup(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(predict_proba(setup.model, setup.sentence));
}
BENCHMARK(BM_Forward)->Arg(10)->Arg(40);

void BM_ForwardBackward(benchmark::State& state) {
  Setup setup(static_cast<std::size_t>(state.range(0)));
  Rng rng(3);
  auto grads = zeros_like(setup.model);
  for (auto _ : state) {
    const auto cache = forward(setup.model, setup.sentence, true, rng);
    backward_accumulate(setup.model, cache, 1, grads, 1.0);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(10)->Arg(40);

void BM_AdamStep(benchmark::State& state) {
  Setup setup(1);
  const auto grads = zeros_like(setup.model);
  OptimizerState opt;
  TrainConfig config;
  for (auto _ : state) optimizer_step(setup.model, grads, opt, config);
}
BENCHMARK(BM_AdamStep);

}  // namespace
BENCHMARK_MAIN();
