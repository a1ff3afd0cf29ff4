#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "musedance/audiofeat.hpp"

namespace musedance::config {

// Every tunable of the pipeline. Defaults follow the reference experiment:
// 50 ms frames every 25 ms, 1024-point FFT, 128 mel bands, 16 kHz audio,
// alpha 1, epsilon 0.7, 4 folds, 10 runs per fold.
struct RunConfig {
  // paths
  std::string manifest;
  std::string cache_dir = "cache";
  std::string checkpoint_dir = "checkpoints";

  // audio features
  int sample_rate = 16000;
  double frame_ms = 50.0;
  double hop_ms = 25.0;
  int fft_size = 1024;
  int n_mels = 128;
  double mel_fmin = 0.0;
  double mel_fmax = 8000.0;
  double log_floor = 1e-10;
  int audio_seg_len = 39;
  int audio_seg_hop = 20;

  // pose features
  double alpha = 1.0;
  double epsilon = 0.7;
  std::string target_frame;  // empty: lexicographically first train clip of fold 0
  int pose_fps = 30;
  double clip_seconds = 10.0;
  int move_seg_len = 30;
  int move_seg_hop = 15;

  // correlation objective
  double r_reg = 1e-4;
  int cca_k = 32;

  // optimization
  std::string optimizer = "adam";
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 512;
  int epochs = 50;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  // protocol
  int folds = 4;
  int runs_per_fold = 10;
  std::uint64_t seed = 42;
  std::uint64_t fold_seed = 9001;

  // significance machinery
  int n_perm = 1000;
  int mc_samples = 100000;

  // extraction worker pool; 0 selects the hardware concurrency
  int workers = 0;

  audiofeat::MelConfig mel_config() const;
  int pose_frames() const;  // frames per clip
  void validate() const;

  // canonical serialized form; equal configs hash equally
  std::string canonical_json() const;
  std::string config_hash() const;
};

// Parses a JSON config file; unknown keys are rejected. Missing keys keep
// their defaults.
RunConfig load_config(const std::filesystem::path& path);

// The minimum DCCA batch; batches below this are rejected at training time.
inline constexpr int kMinDccaBatch = 256;

}  // namespace musedance::config
