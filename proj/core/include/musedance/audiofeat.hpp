#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "musedance/ingest.hpp"

namespace musedance::audiofeat {

struct MelConfig {
  int sample_rate = 16000;
  int frame_len = 800;  // 50 ms
  int hop = 400;        // 25 ms
  int fft_size = 1024;
  int n_mels = 128;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;

  void validate() const;
};

// Hann-windowed frames, zero-padded to fft_size.
// Frame count is floor((n - frame_len) / hop) + 1.
std::vector<Eigen::VectorXd> frame_signal(const ingest::AudioClip& clip,
                                          const MelConfig& cfg);

// Triangular mel filterbank, peak 1, HTK scale 2595*log10(1 + f/700),
// sampled at FFT bin centers. Shape (fft_size/2 + 1) x n_mels.
Eigen::MatrixXd mel_filterbank(const MelConfig& cfg);

// Center frequency (Hz) of each mel band.
std::vector<double> mel_center_hz(const MelConfig& cfg);

// Natural log of (filterbank energy + log_floor); shape frames x n_mels.
// A 10 s clip at the default config yields exactly 399 x 128.
Eigen::MatrixXd mel_spectrogram(const ingest::AudioClip& clip, const MelConfig& cfg);

struct SegmentBatch {
  std::string clip_id;
  int seg_len = 0;
  int hop = 0;
  std::vector<Eigen::MatrixXd> segments;
};

// Overlapping fixed-length row windows; count = floor((T - seg_len)/hop) + 1.
SegmentBatch segment_features(const Eigen::MatrixXd& m, int seg_len, int hop,
                              std::string clip_id = {});

// Segment cache on disk: the segment stack as one (n_seg*seg_len) x cols
// float32 matrix in the matio format.
void write_segment_cache(const std::filesystem::path& path, const SegmentBatch& batch);
SegmentBatch read_segment_cache(const std::filesystem::path& path, int seg_len,
                                int hop, std::string clip_id = {});

}  // namespace musedance::audiofeat
