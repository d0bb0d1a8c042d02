#include <benchmark/benchmark.h>

#include "rtn/losses.hpp"
#include "rtn/objective.hpp"
#include "rtn/optimizer.hpp"

using namespace rtn;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNCubed);

void BM_Mmd2Quadratic(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor zs = random_matrix(n, 64, 3), zt = random_matrix(n, 64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(mmd2_quadratic(zs, zt, 64.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Mmd2Quadratic)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNSquared);

void BM_Mmd2Linear(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor zs = random_matrix(n, 64, 3), zt = random_matrix(n, 64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(mmd2_linear(zs, zt, 64.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Mmd2Linear)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oN);

void BM_Mmd2Grad(benchmark::State& state) {
  const Tensor zs = random_matrix(64, 64, 5), zt = random_matrix(64, 64, 6);
  for (auto _ : state) benchmark::DoNotOptimize(mmd2_grad(zs, zt, 64.0));
}
BENCHMARK(BM_Mmd2Grad);

void BM_Fuse(benchmark::State& state) {
  const std::vector<Tensor> layers = {random_matrix(128, 16, 7), random_matrix(128, 4, 8)};
  for (auto _ : state) benchmark::DoNotOptimize(fuse(layers));
}
BENCHMARK(BM_Fuse);

void BM_TensorSketch(benchmark::State& state) {
  Rng rng(9);
  const Tensor a = random_matrix(128, 16, 10), b = random_matrix(128, 4, 11);
  const CountSketch sa = CountSketch::random(16, 32, rng), sb = CountSketch::random(4, 32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(tensor_sketch(a, b, sa, sb));
}
BENCHMARK(BM_TensorSketch);

void BM_ForwardBackward(benchmark::State& state) {
  Rng rng(12);
  Network net = Network::create(NetworkShape{}, {}, rng);
  const Tensor x = random_matrix(128, 10, 13);
  for (auto _ : state) {
    const HeadOutputs out = net.forward(x);
    HeadGradients g;
    g.d_f_s = Tensor::filled(out.f_s.shape(), 1.0);
    net.zero_grad();
    benchmark::DoNotOptimize(net.backward(g));
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_TrainingStep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.variant = static_cast<Variant>(state.range(0));
  Rng rng(14);
  Network net = Network::create(cfg.network, flags_for(cfg.variant), rng);
  const Tensor xs = random_matrix(64, 10, 15), xt = random_matrix(64, 10, 16);
  std::vector<std::size_t> ys(64);
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = i % 4;
  SgdState sgd(cfg.schedule, cfg.momentum, 1000000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective(net, {xs, ys, xt}, cfg));
    sgd.step(net);
  }
  state.SetLabel(to_string(cfg.variant));
}
BENCHMARK(BM_TrainingStep)->DenseRange(0, 4);

}  // namespace

BENCHMARK_MAIN();
