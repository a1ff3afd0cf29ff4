#include <benchmark/benchmark.h>

#include "musedance/common.hpp"
#include "musedance/dcca.hpp"

using namespace musedance;

namespace {

Eigen::MatrixXd random_matrix(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

static void BM_DccaLoss(benchmark::State& state) {
  const auto x = random_matrix(512, 128, 1);
  const auto y = random_matrix(512, 32, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dcca::dcca_loss(x, y, 1e-4));
  }
}
BENCHMARK(BM_DccaLoss);

static void BM_DccaGradient(benchmark::State& state) {
  const auto x = random_matrix(512, 128, 3);
  const auto y = random_matrix(512, 32, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dcca::dcca_gradient(x, y, 1e-4));
  }
}
BENCHMARK(BM_DccaGradient);

static void BM_LinearCcaFit(benchmark::State& state) {
  const auto x = random_matrix(2048, 128, 5);
  const auto y = random_matrix(2048, 32, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dcca::fit_linear_cca(x, y, 32, 1e-4));
  }
}
BENCHMARK(BM_LinearCcaFit);
