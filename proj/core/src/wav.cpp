#include "musedance/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "musedance/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

namespace musedance {

namespace {

template <typename T>
T read_le(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != sizeof(T)) throw DataError("truncated WAV file: " + path.string());
  return v;
}

template <typename T>
void write_le(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

RawAudio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open audio file: " + path.string());

  char tag[4];
  in.read(tag, 4);
  if (in.gcount() != 4 || std::memcmp(tag, "RIFF", 4) != 0)
    throw DataError("not a RIFF file: " + path.string());
  (void)read_le<std::uint32_t>(in, path);  // riff size, unreliable in the wild
  in.read(tag, 4);
  if (in.gcount() != 4 || std::memcmp(tag, "WAVE", 4) != 0)
    throw DataError("not a WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> data;

  while (in.read(tag, 4)) {
    auto chunk_size = read_le<std::uint32_t>(in, path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw DataError("malformed fmt chunk: " + path.string());
      format = read_le<std::uint16_t>(in, path);
      channels = read_le<std::uint16_t>(in, path);
      rate = read_le<std::uint32_t>(in, path);
      (void)read_le<std::uint32_t>(in, path);  // byte rate
      (void)read_le<std::uint16_t>(in, path);  // block align
      bits = read_le<std::uint16_t>(in, path);
      in.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(chunk_size);
      in.read(data.data(), chunk_size);
      if (in.gcount() != static_cast<std::streamsize>(chunk_size))
        throw DataError("truncated data chunk: " + path.string());
      break;
    } else {
      // skip unknown chunks (LIST, fact, ...), padded to even size
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }

  if (!have_fmt) throw DataError("missing fmt chunk: " + path.string());
  if (data.empty()) throw DataError("zero-length audio: " + path.string());
  if (channels == 0 || rate == 0) throw DataError("malformed fmt chunk: " + path.string());

  std::size_t frame_count = 0;
  RawAudio out;
  out.sample_rate = static_cast<int>(rate);

  if (format == 1 && bits == 16) {
    frame_count = data.size() / (2u * channels);
    out.samples.resize(frame_count);
    const auto* s = reinterpret_cast<const std::int16_t*>(data.data());
    for (std::size_t i = 0; i < frame_count; ++i) {
      double acc = 0.0;
      for (unsigned c = 0; c < channels; ++c) acc += s[i * channels + c] / 32768.0;
      out.samples[i] = acc / channels;
    }
  } else if (format == 3 && bits == 32) {
    frame_count = data.size() / (4u * channels);
    out.samples.resize(frame_count);
    const auto* s = reinterpret_cast<const float*>(data.data());
    for (std::size_t i = 0; i < frame_count; ++i) {
      double acc = 0.0;
      for (unsigned c = 0; c < channels; ++c) acc += s[i * channels + c];
      out.samples[i] = acc / channels;
    }
  } else {
    throw DataError("unsupported WAV encoding (want 16-bit PCM or 32-bit float): " +
                    path.string());
  }

  if (out.samples.empty()) throw DataError("zero-length audio: " + path.string());
  return out;
}

void write_wav_pcm16(const std::filesystem::path& path,
                     const std::vector<double>& samples, int sample_rate) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open audio file for writing: " + path.string());

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, 1);  // integer PCM
  write_le<std::uint16_t>(out, 1);  // mono
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate * 2));
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
  for (double v : samples) {
    double clamped = std::clamp(v, -1.0, 1.0);
    auto q = static_cast<std::int16_t>(std::lrint(clamped * 32767.0));
    write_le<std::int16_t>(out, q);
  }
  if (!out) throw DataError("short write on audio file: " + path.string());
}

std::vector<double> resample_sinc(const std::vector<double>& x, int src_rate,
                                  int dst_rate) {
  if (src_rate <= 0 || dst_rate <= 0) throw ConfigError("invalid resample rates");
  if (src_rate == dst_rate) return x;

  const std::size_t n_src = x.size();
  const std::size_t n_dst = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_src) * dst_rate / src_rate));
  std::vector<double> y(n_dst, 0.0);

  constexpr int kHalfTaps = 32;  // 64 taps total
  const double ratio = static_cast<double>(src_rate) / dst_rate;
  // cutoff in cycles per source sample, below both Nyquist frequencies
  const double fc = 0.475 * std::min(1.0, static_cast<double>(dst_rate) / src_rate);

  for (std::size_t i = 0; i < n_dst; ++i) {
    const double center = static_cast<double>(i) * ratio;
    const long base = static_cast<long>(std::floor(center));
    double acc = 0.0;
    for (int t = -kHalfTaps + 1; t <= kHalfTaps; ++t) {
      const long n = base + t;
      if (n < 0 || n >= static_cast<long>(n_src)) continue;
      const double u = center - static_cast<double>(n);
      double s;
      if (std::abs(u) < 1e-12) {
        s = 2.0 * fc;
      } else {
        s = std::sin(2.0 * std::numbers::pi * fc * u) / (std::numbers::pi * u);
      }
      const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * u / kHalfTaps));
      acc += x[static_cast<std::size_t>(n)] * s * w;
    }
    y[i] = acc;
  }
  return y;
}

}  // namespace musedance
