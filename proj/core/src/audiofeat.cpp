#include "musedance/audiofeat.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "musedance/common.hpp"
#include "musedance/matio.hpp"

namespace musedance::audiofeat {

namespace {

// The FFTW planner is not thread-safe; plan creation/destruction is locked.
// Executing distinct plans concurrently is fine.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class FftR2C {
 public:
  explicit FftR2C(int n) : n_(n), in_(static_cast<std::size_t>(n), 0.0),
                           out_(static_cast<std::size_t>(n) / 2 + 1) {
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n_, in_.data(),
                                 reinterpret_cast<fftw_complex*>(out_.data()),
                                 FFTW_ESTIMATE);
  }
  ~FftR2C() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  FftR2C(const FftR2C&) = delete;
  FftR2C& operator=(const FftR2C&) = delete;

  // |X_k|^2 for k = 0..n/2
  void power_spectrum(const Eigen::VectorXd& frame, Eigen::VectorXd& power) {
    for (int i = 0; i < n_; ++i) in_[static_cast<std::size_t>(i)] = frame[i];
    fftw_execute(plan_);
    const int bins = n_ / 2 + 1;
    for (int k = 0; k < bins; ++k) power[k] = std::norm(out_[static_cast<std::size_t>(k)]);
  }

 private:
  int n_;
  std::vector<double> in_;
  std::vector<std::complex<double>> out_;
  fftw_plan plan_;
};

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

std::vector<double> mel_edges_hz(const MelConfig& cfg) {
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    edges[static_cast<std::size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  return edges;
}

}  // namespace

void MelConfig::validate() const {
  if (sample_rate <= 0 || frame_len <= 0 || hop <= 0 || fft_size <= 0 || n_mels <= 0)
    throw ConfigError("mel config fields must be positive");
  if (frame_len > fft_size)
    throw ConfigError("frame_len exceeds fft_size; frames must fit zero-padded");
  if (fmax > sample_rate / 2.0 || fmin < 0.0 || fmin >= fmax)
    throw ConfigError("mel band range must satisfy 0 <= fmin < fmax <= Nyquist");
  if (log_floor <= 0.0) throw ConfigError("log_floor must be positive");
}

std::vector<Eigen::VectorXd> frame_signal(const ingest::AudioClip& clip,
                                          const MelConfig& cfg) {
  cfg.validate();
  if (clip.sample_rate != cfg.sample_rate)
    throw ConfigError("clip sample rate " + std::to_string(clip.sample_rate) +
                      " does not match mel config " + std::to_string(cfg.sample_rate));
  const auto n = static_cast<long>(clip.samples.size());
  if (n < cfg.frame_len)
    throw DataError("clip shorter than one frame (" + std::to_string(n) + " < " +
                    std::to_string(cfg.frame_len) + " samples)");

  const long count = (n - cfg.frame_len) / cfg.hop + 1;
  Eigen::VectorXd window(cfg.frame_len);
  for (int i = 0; i < cfg.frame_len; ++i)
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / cfg.frame_len));

  std::vector<Eigen::VectorXd> frames;
  frames.reserve(static_cast<std::size_t>(count));
  for (long f = 0; f < count; ++f) {
    Eigen::VectorXd frame = Eigen::VectorXd::Zero(cfg.fft_size);
    const long off = f * cfg.hop;
    for (int i = 0; i < cfg.frame_len; ++i)
      frame[i] = clip.samples[static_cast<std::size_t>(off + i)] * window[i];
    frames.push_back(std::move(frame));
  }
  return frames;
}

Eigen::MatrixXd mel_filterbank(const MelConfig& cfg) {
  cfg.validate();
  const int bins = cfg.fft_size / 2 + 1;
  const auto edges = mel_edges_hz(cfg);
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(bins, cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
      if (f <= lo || f >= hi) continue;
      fb(k, m) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
    }
  }
  return fb;
}

std::vector<double> mel_center_hz(const MelConfig& cfg) {
  const auto edges = mel_edges_hz(cfg);
  std::vector<double> centers(static_cast<std::size_t>(cfg.n_mels));
  for (int m = 0; m < cfg.n_mels; ++m)
    centers[static_cast<std::size_t>(m)] = edges[static_cast<std::size_t>(m) + 1];
  return centers;
}

Eigen::MatrixXd mel_spectrogram(const ingest::AudioClip& clip, const MelConfig& cfg) {
  const auto frames = frame_signal(clip, cfg);
  const Eigen::MatrixXd fb = mel_filterbank(cfg);
  const int bins = cfg.fft_size / 2 + 1;

  FftR2C fft(cfg.fft_size);
  Eigen::MatrixXd out(static_cast<long>(frames.size()), cfg.n_mels);
  Eigen::VectorXd power(bins);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    fft.power_spectrum(frames[f], power);
    Eigen::VectorXd mel = fb.transpose() * power;
    for (int m = 0; m < cfg.n_mels; ++m)
      out(static_cast<long>(f), m) = std::log(mel[m] + cfg.log_floor);
  }
  return out;
}

SegmentBatch segment_features(const Eigen::MatrixXd& m, int seg_len, int hop,
                              std::string clip_id) {
  if (seg_len <= 0 || hop <= 0) throw ConfigError("segment length and hop must be positive");
  const long t = m.rows();
  if (t < seg_len)
    throw DataError("matrix has " + std::to_string(t) + " rows, shorter than one segment of " +
                    std::to_string(seg_len));
  const long count = (t - seg_len) / hop + 1;
  SegmentBatch batch;
  batch.clip_id = std::move(clip_id);
  batch.seg_len = seg_len;
  batch.hop = hop;
  batch.segments.reserve(static_cast<std::size_t>(count));
  for (long s = 0; s < count; ++s)
    batch.segments.push_back(m.middleRows(s * hop, seg_len));
  return batch;
}

void write_segment_cache(const std::filesystem::path& path, const SegmentBatch& batch) {
  if (batch.segments.empty()) throw DataError("refusing to cache an empty segment batch");
  const long cols = batch.segments.front().cols();
  Eigen::MatrixXf stack(static_cast<long>(batch.segments.size()) * batch.seg_len, cols);
  for (std::size_t s = 0; s < batch.segments.size(); ++s)
    stack.middleRows(static_cast<long>(s) * batch.seg_len, batch.seg_len) =
        batch.segments[s].cast<float>();
  write_matrix_f32(path, stack);
}

SegmentBatch read_segment_cache(const std::filesystem::path& path, int seg_len,
                                int hop, std::string clip_id) {
  const Eigen::MatrixXf stack = read_matrix_f32(path);
  if (seg_len <= 0 || stack.rows() % seg_len != 0)
    throw DataError("segment cache " + path.string() + " rows (" +
                    std::to_string(stack.rows()) + ") not a multiple of segment length " +
                    std::to_string(seg_len));
  SegmentBatch batch;
  batch.clip_id = std::move(clip_id);
  batch.seg_len = seg_len;
  batch.hop = hop;
  const long count = stack.rows() / seg_len;
  batch.segments.reserve(static_cast<std::size_t>(count));
  for (long s = 0; s < count; ++s)
    batch.segments.push_back(stack.middleRows(s * seg_len, seg_len).cast<double>());
  return batch;
}

}  // namespace musedance::audiofeat
