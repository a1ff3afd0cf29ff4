#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "musedance/audiofeat.hpp"
#include "musedance/common.hpp"
#include "musedance/matio.hpp"
#include "testutil.hpp"

using namespace musedance;
using namespace musedance::audiofeat;
using ingest::AudioClip;
using testutil::TmpDir;

namespace {

AudioClip clip_of(std::vector<double> samples) { return {std::move(samples), 16000}; }

AudioClip random_clip(int n, std::uint64_t seed, double amp = 0.3) {
  Rng rng(seed);
  std::vector<double> s(static_cast<std::size_t>(n));
  for (auto& v : s) v = amp * (2.0 * rng.uniform() - 1.0);
  return clip_of(std::move(s));
}

}  // namespace

TEST_CASE("framing: counts follow floor((n - len)/hop) + 1") {
  const MelConfig cfg;
  CHECK(frame_signal(clip_of(std::vector<double>(160000, 0.1)), cfg).size() == 399);
  CHECK(frame_signal(clip_of(std::vector<double>(800, 0.1)), cfg).size() == 1);
  CHECK(frame_signal(clip_of(std::vector<double>(1200, 0.1)), cfg).size() == 2);
  CHECK_THROWS_AS(frame_signal(clip_of(std::vector<double>(799, 0.1)), cfg), DataError);
}

TEST_CASE("framing: frames are zero-padded to the FFT size") {
  const MelConfig cfg;
  const auto frames = frame_signal(random_clip(1200, 1), cfg);
  REQUIRE(frames.size() == 2);
  for (const auto& f : frames) {
    REQUIRE(f.size() == 1024);
    for (int i = 800; i < 1024; ++i) CHECK(f[i] == 0.0);
  }
}

TEST_CASE("mel: 10 s clip gives a finite 399 x 128 matrix") {
  const MelConfig cfg;
  const Eigen::MatrixXd m = mel_spectrogram(random_clip(160000, 2), cfg);
  CHECK(m.rows() == 399);
  CHECK(m.cols() == 128);
  CHECK(m.allFinite());
}

TEST_CASE("mel: silence collapses to log(log_floor)") {
  const MelConfig cfg;
  const Eigen::MatrixXd m = mel_spectrogram(clip_of(std::vector<double>(16000, 0.0)), cfg);
  const double expect = std::log(cfg.log_floor);
  CHECK(m.minCoeff() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(m.maxCoeff() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("mel: a 1 kHz tone peaks in the band whose center is nearest 1 kHz") {
  const MelConfig cfg;
  const AudioClip tone = clip_of(testutil::sine_wave(1000.0, 0.5, 32000, 16000));
  const Eigen::MatrixXd m = mel_spectrogram(tone, cfg);

  // independent center computation from the HTK mel formula
  auto to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto to_hz = [](double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); };
  const double lo = to_mel(cfg.fmin), hi = to_mel(cfg.fmax);
  int nearest = -1;
  double best = 1e18;
  for (int b = 0; b < cfg.n_mels; ++b) {
    const double center = to_hz(lo + (hi - lo) * (b + 1) / (cfg.n_mels + 1));
    if (std::abs(center - 1000.0) < best) {
      best = std::abs(center - 1000.0);
      nearest = b;
    }
  }

  for (long r = 0; r < m.rows(); ++r) {
    int argmax = 0;
    for (int b = 1; b < cfg.n_mels; ++b)
      if (m(r, b) > m(r, argmax)) argmax = b;
    CHECK(argmax == nearest);
  }
}

TEST_CASE("mel: scaling the waveform by c shifts every entry by 2 ln c") {
  const MelConfig cfg;
  const AudioClip base = random_clip(16000, 3, 0.4);
  AudioClip scaled = base;
  const double c = 3.7;
  for (auto& v : scaled.samples) v *= c;
  const Eigen::MatrixXd a = mel_spectrogram(base, cfg);
  const Eigen::MatrixXd b = mel_spectrogram(scaled, cfg);
  const Eigen::MatrixXd diff = b - a;
  // entries this loud sit far above the log floor
  CHECK((diff.array() - 2.0 * std::log(c)).abs().maxCoeff() < 1e-6);
}

TEST_CASE("segmentation: counts match the hop arithmetic") {
  Eigen::MatrixXd audio_like = Eigen::MatrixXd::Random(399, 128);
  CHECK(segment_features(audio_like, 39, 20).segments.size() == 19);
  Eigen::MatrixXd move_like = Eigen::MatrixXd::Random(300, 119);
  CHECK(segment_features(move_like, 30, 15).segments.size() == 19);
  Eigen::MatrixXd exact = Eigen::MatrixXd::Random(30, 4);
  const auto one = segment_features(exact, 30, 15);
  REQUIRE(one.segments.size() == 1);
  CHECK(one.segments[0] == exact);
  CHECK_THROWS_AS(segment_features(Eigen::MatrixXd::Random(29, 4), 30, 15), DataError);
}

TEST_CASE("segmentation: segments share the source rows") {
  const Eigen::MatrixXd m = Eigen::MatrixXd::Random(50, 7);
  const auto segs = segment_features(m, 10, 4);
  REQUIRE(segs.segments.size() == 11);
  for (std::size_t s = 0; s < segs.segments.size(); ++s)
    for (int r = 0; r < 10; ++r)
      CHECK(segs.segments[s].row(r) == m.row(static_cast<long>(s) * 4 + r));

  // non-overlapping hop reproduces the source exactly
  const auto tiles = segment_features(m, 10, 10);
  REQUIRE(tiles.segments.size() == 5);
  Eigen::MatrixXd rebuilt(50, 7);
  for (std::size_t s = 0; s < tiles.segments.size(); ++s)
    rebuilt.middleRows(static_cast<long>(s) * 10, 10) = tiles.segments[s];
  CHECK(rebuilt == m);
}

TEST_CASE("cache: float32 matrix round-trips bit-exactly") {
  TmpDir dir("matio");
  Eigen::MatrixXf m = Eigen::MatrixXf::Random(57, 13);
  const auto path = dir.path() / "m.bin";
  write_matrix_f32(path, m);
  const Eigen::MatrixXf back = read_matrix_f32(path);
  REQUIRE(back.rows() == m.rows());
  REQUIRE(back.cols() == m.cols());
  CHECK(std::memcmp(back.data(), m.data(),
                    sizeof(float) * static_cast<std::size_t>(m.size())) == 0);
}

TEST_CASE("cache: segment stacks reload to the stored values") {
  TmpDir dir("segcache");
  const Eigen::MatrixXd m = Eigen::MatrixXd::Random(399, 128);
  const auto segs = segment_features(m, 39, 20, "clip0");
  const auto path = dir.path() / "clip0.audio.bin";
  write_segment_cache(path, segs);
  const auto back = read_segment_cache(path, 39, 20, "clip0");
  REQUIRE(back.segments.size() == segs.segments.size());
  for (std::size_t s = 0; s < segs.segments.size(); ++s) {
    const Eigen::MatrixXf want = segs.segments[s].cast<float>();
    const Eigen::MatrixXf got = back.segments[s].cast<float>();
    CHECK(want == got);
  }
}

TEST_CASE("mel: golden spectrogram stays pinned") {
  const MelConfig cfg;
  // deterministic three-tone second of audio
  std::vector<double> wave(16000, 0.0);
  for (int i = 0; i < 16000; ++i) {
    const double t = i / 16000.0;
    wave[static_cast<std::size_t>(i)] =
        0.30 * std::sin(2.0 * std::numbers::pi * 440.0 * t) +
        0.20 * std::sin(2.0 * std::numbers::pi * 1250.0 * t + 0.7) +
        0.10 * std::sin(2.0 * std::numbers::pi * 3333.0 * t + 1.9);
  }
  const Eigen::MatrixXd m = mel_spectrogram(clip_of(std::move(wave)), cfg);
  REQUIRE(m.rows() == 39);

  const auto golden_path = std::filesystem::path(MD_GOLDEN_DIR) / "mel_1s.bin";
  if (!std::filesystem::exists(golden_path)) {
    std::filesystem::create_directories(golden_path.parent_path());
    write_matrix_f32(golden_path, m.cast<float>());
    MESSAGE("golden file regenerated: ", golden_path.string());
  }
  const Eigen::MatrixXf golden = read_matrix_f32(golden_path);
  REQUIRE(golden.rows() == m.rows());
  REQUIRE(golden.cols() == m.cols());
  double max_err = 0.0;
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < m.cols(); ++c)
      max_err = std::max(max_err, std::abs(m(r, c) - golden(r, c)) /
                                      std::max(1.0, std::abs(m(r, c))));
  CHECK(max_err < 1e-6);
}
