#include <benchmark/benchmark.h>

#include "musedance/audiofeat.hpp"
#include "musedance/common.hpp"
#include "musedance/posefeat.hpp"

using namespace musedance;

static void BM_MelSpectrogram10s(benchmark::State& state) {
  Rng rng(1);
  ingest::AudioClip clip;
  clip.samples.resize(160000);
  for (auto& v : clip.samples) v = 0.3 * (2.0 * rng.uniform() - 1.0);
  const audiofeat::MelConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(audiofeat::mel_spectrogram(clip, cfg));
  }
}
BENCHMARK(BM_MelSpectrogram10s);

static void BM_MovementFeatures(benchmark::State& state) {
  Rng rng(2);
  ingest::PoseTrack track;
  track.frames.resize(300);
  for (auto& f : track.frames)
    for (auto& p : f) {
      p.x = 640.0 + 100.0 * rng.normal();
      p.y = 360.0 + 100.0 * rng.normal();
    }
  for (auto _ : state) {
    benchmark::DoNotOptimize(posefeat::derive_movement_features(track));
  }
}
BENCHMARK(BM_MovementFeatures);

static void BM_SegmentFeatures(benchmark::State& state) {
  const Eigen::MatrixXd m = Eigen::MatrixXd::Random(399, 128);
  for (auto _ : state) {
    benchmark::DoNotOptimize(audiofeat::segment_features(m, 39, 20));
  }
}
BENCHMARK(BM_SegmentFeatures);
