#include <benchmark/benchmark.h>

#include "musedance/common.hpp"
#include "musedance/retrieval.hpp"

using namespace musedance;
using retrieval::EmbeddingSet;

namespace {

EmbeddingSet random_set(int n, int k, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingSet s;
  s.vecs.resize(n, k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) s.vecs(i, j) = rng.normal();
    s.ids.push_back("clip_" + std::to_string(i));
    s.styles.push_back(static_cast<ingest::Style>(i % 10));
  }
  return s;
}

}  // namespace

static void BM_PairAccuracy600(benchmark::State& state) {
  const auto x = random_set(600, 32, 1);
  const auto y = random_set(600, 32, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieval::pair_accuracy(x, y));
  }
}
BENCHMARK(BM_PairAccuracy600);

static void BM_ClassMap600(benchmark::State& state) {
  const auto x = random_set(600, 32, 3);
  const auto y = random_set(600, 32, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieval::class_map(x, y));
  }
}
BENCHMARK(BM_ClassMap600);

static void BM_BinomialTail(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieval::binomial_pvalue(82, 144, 0.25));
  }
}
BENCHMARK(BM_BinomialTail);
