#include <benchmark/benchmark.h>

#include "musedance/common.hpp"
#include "musedance/nnet.hpp"

using namespace musedance;
using namespace musedance::nnet;

namespace {

Tensor random_tensor(int n, int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(n, h, w, c);
  for (auto& v : t.v) v = rng.normal();
  return t;
}

}  // namespace

static void BM_AudioBranchForward(benchmark::State& state) {
  Branch b = Branch::audio();
  Rng rng(1);
  b.init_params(rng);
  const Tensor x = random_tensor(static_cast<int>(state.range(0)), 39, 128, 1, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(b.forward(x, Mode::train));
  }
}
BENCHMARK(BM_AudioBranchForward)->Arg(64);

static void BM_AudioBranchBackward(benchmark::State& state) {
  Branch b = Branch::audio();
  Rng rng(3);
  b.init_params(rng);
  const int n = static_cast<int>(state.range(0));
  const Tensor x = random_tensor(n, 39, 128, 1, 4);
  const Eigen::MatrixXd dout = Eigen::MatrixXd::Constant(n, 128, 0.01);
  for (auto _ : state) {
    b.forward(x, Mode::train);
    for (auto* p : b.params()) p->zero_grad();
    benchmark::DoNotOptimize(b.backward(dout));
  }
}
BENCHMARK(BM_AudioBranchBackward)->Arg(64);

static void BM_MovementBranchForward(benchmark::State& state) {
  Branch b = Branch::movement();
  Rng rng(5);
  b.init_params(rng);
  const Tensor x = random_tensor(static_cast<int>(state.range(0)), 30, 1, 119, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(b.forward(x, Mode::train));
  }
}
BENCHMARK(BM_MovementBranchForward)->Arg(64);
