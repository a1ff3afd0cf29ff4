#pragma once

#include <filesystem>
#include <vector>

namespace musedance {

struct RawAudio {
  std::vector<double> samples;  // mono, [-1, 1]
  int sample_rate = 0;
};

// Reads a RIFF/WAVE file. Accepts 16-bit integer PCM and 32-bit float
// payloads; multi-channel audio is averaged down to mono.
RawAudio read_wav(const std::filesystem::path& path);

// Writes mono 16-bit integer PCM. Samples are clamped to [-1, 1].
void write_wav_pcm16(const std::filesystem::path& path,
                     const std::vector<double>& samples, int sample_rate);

// 64-tap windowed-sinc resampler (Hann window, 0.95 rolloff). Output length
// is round(n_src * dst_rate / src_rate).
std::vector<double> resample_sinc(const std::vector<double>& x, int src_rate,
                                  int dst_rate);

}  // namespace musedance
