#include "musedance/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "musedance/common.hpp"
#include "musedance/wav.hpp"

namespace musedance::synth {

namespace {

using Eigen::MatrixXd;
using ingest::Keypoint;

constexpr int kSampleRate = 16000;
constexpr double kDuration = 10.0;
constexpr int kFps = 30;
constexpr int kFrames = 300;
constexpr int kWidth = 1280;
constexpr int kHeight = 720;

// Canonical standing skeleton in frame space; y grows downward.
const std::array<ingest::Point2, ingest::kNumKeypoints> kBasePose = {{
    {640, 190},  // head
    {640, 240},  // neck
    {595, 255},  // shoulder_l
    {685, 255},  // shoulder_r
    {570, 315},  // elbow_l
    {710, 315},  // elbow_r
    {550, 375},  // wrist_l
    {730, 375},  // wrist_r
    {612, 390},  // hip_l
    {668, 390},  // hip_r
    {605, 480},  // knee_l
    {675, 480},  // knee_r
    {600, 575},  // ankle_l
    {680, 575},  // ankle_r
}};

struct DriveGroup {
  Keypoint primary;
  Keypoint mirror;
  bool y_axis;
  double base_amp;  // pixels
};

// One group per latent component (cycled); the mirror joint moves in
// antiphase so limbs stay plausible.
const std::array<DriveGroup, 4> kDriveGroups = {{
    {Keypoint::wrist_l, Keypoint::wrist_r, false, 30.0},
    {Keypoint::knee_l, Keypoint::knee_r, true, 14.0},
    {Keypoint::head, Keypoint::neck, true, 9.0},
    {Keypoint::hip_l, Keypoint::hip_r, false, 16.0},
}};

std::string clip_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "syn%04d", i);
  return buf;
}

std::vector<double> style_prototype(const SynthConfig& cfg, int style) {
  Rng rng(cfg.seed ^ (0x5163a2b1u + 997u * static_cast<std::uint64_t>(style)));
  std::vector<double> mu(static_cast<std::size_t>(cfg.latent_dim));
  for (auto& v : mu) v = 1.1 * (2.0 * rng.uniform() - 1.0);
  return mu;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_objects < 1) throw ConfigError("need at least one synthetic object");
  if (latent_dim < 1 || latent_dim > 32)
    throw ConfigError("latent_dim must lie in [1, 32]");
  if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be non-negative");
  if (styles < 1 || styles > ingest::kNumStyles)
    throw ConfigError("styles must lie in [1, 10]");
}

double tone_frequency(const SynthConfig& cfg, int j) {
  // log-spaced carriers between 200 Hz and 6 kHz
  const double frac = (j + 0.5) / cfg.latent_dim;
  return 200.0 * std::pow(30.0, frac);
}

std::pair<Keypoint, bool> driven_coordinate(const SynthConfig& cfg, int j) {
  (void)cfg;
  const DriveGroup& g = kDriveGroups[static_cast<std::size_t>(j) % kDriveGroups.size()];
  return {g.primary, g.y_axis};
}

double pose_rate(const SynthConfig& cfg, int style_index) {
  (void)cfg;
  return 0.8 + 0.35 * style_index;
}

ingest::DatasetManifest generate_dataset(const SynthConfig& cfg,
                                         const std::filesystem::path& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "audio");
  fs::create_directories(out_dir / "pose");

  const int n_samples = static_cast<int>(kSampleRate * kDuration);
  const double amp_scale = 4.0 / std::max(4, cfg.latent_dim);

  std::string manifest_text;
  ingest::DatasetManifest manifest;

  for (int obj = 0; obj < cfg.n_objects; ++obj) {
    const int style = obj % cfg.styles;
    const std::string id = clip_name(obj);
    Rng rng(cfg.seed * 1000003ull + static_cast<std::uint64_t>(obj));

    const auto mu = style_prototype(cfg, style);
    std::vector<double> z(static_cast<std::size_t>(cfg.latent_dim));
    for (int j = 0; j < cfg.latent_dim; ++j)
      z[static_cast<std::size_t>(j)] =
          std::clamp(mu[static_cast<std::size_t>(j)] + 0.4 * rng.normal(), -2.2, 2.2);

    const double rate = pose_rate(cfg, style);
    std::vector<double> tone_phase(static_cast<std::size_t>(cfg.latent_dim));
    std::vector<double> mod_phase(static_cast<std::size_t>(cfg.latent_dim));
    std::vector<double> move_phase(static_cast<std::size_t>(cfg.latent_dim));
    for (int j = 0; j < cfg.latent_dim; ++j) {
      tone_phase[static_cast<std::size_t>(j)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      mod_phase[static_cast<std::size_t>(j)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      move_phase[static_cast<std::size_t>(j)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }

    // audio: summed amplitude-modulated tones, amplitudes linear in z
    std::vector<double> wave(static_cast<std::size_t>(n_samples), 0.0);
    for (int j = 0; j < cfg.latent_dim; ++j) {
      const double a =
          (0.04 + 0.028 * (z[static_cast<std::size_t>(j)] + 2.5)) * amp_scale;
      const double f = tone_frequency(cfg, j);
      for (int s = 0; s < n_samples; ++s) {
        const double t = static_cast<double>(s) / kSampleRate;
        const double mod =
            1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * rate * t +
                                 mod_phase[static_cast<std::size_t>(j)]);
        wave[static_cast<std::size_t>(s)] +=
            a * mod * std::sin(2.0 * std::numbers::pi * f * t +
                               tone_phase[static_cast<std::size_t>(j)]);
      }
    }
    write_wav_pcm16(out_dir / "audio" / (id + ".wav"), wave, kSampleRate);

    // pose: joint oscillations whose amplitudes are linear in z, plus noise
    ingest::PoseTrack track;
    track.fps = kFps;
    track.frame_width = kWidth;
    track.frame_height = kHeight;
    track.frames.resize(kFrames);
    for (int fr = 0; fr < kFrames; ++fr) {
      const double t = static_cast<double>(fr) / kFps;
      ingest::SkeletonFrame f;
      for (int k = 0; k < ingest::kNumKeypoints; ++k)
        f[static_cast<std::size_t>(k)] = kBasePose[static_cast<std::size_t>(k)];

      // small fixed-amplitude ankle bounce keeps the ankle statistics busy
      const double bounce = 3.0 * std::sin(2.0 * std::numbers::pi * rate * t);
      f[static_cast<std::size_t>(Keypoint::ankle_l)].y += bounce;
      f[static_cast<std::size_t>(Keypoint::ankle_r)].y += bounce;

      for (int j = 0; j < cfg.latent_dim; ++j) {
        const DriveGroup& g =
            kDriveGroups[static_cast<std::size_t>(j) % kDriveGroups.size()];
        const double harmonic = 1.0 + 0.5 * (j / static_cast<int>(kDriveGroups.size()));
        const double amp =
            g.base_amp * (1.1 + 0.45 * z[static_cast<std::size_t>(j)]);
        const double osc = amp * std::sin(2.0 * std::numbers::pi * rate * harmonic * t +
                                          move_phase[static_cast<std::size_t>(j)]);
        auto& primary = f[static_cast<std::size_t>(g.primary)];
        auto& mirror = f[static_cast<std::size_t>(g.mirror)];
        if (g.y_axis) {
          primary.y += osc;
          mirror.y -= 0.6 * osc;
        } else {
          primary.x += osc;
          mirror.x -= 0.6 * osc;
        }
      }

      for (auto& p : f) {
        p.x = std::clamp(p.x + cfg.noise_sigma * rng.normal(), 2.0, kWidth - 2.0);
        p.y = std::clamp(p.y + cfg.noise_sigma * rng.normal(), 2.0, kHeight - 2.0);
      }
      track.frames[static_cast<std::size_t>(fr)] = f;
    }
    ingest::write_pose_track(out_dir / "pose" / (id + ".txt"), track);

    manifest_text += id + "\taudio/" + id + ".wav\tpose/" + id + ".txt\t" +
                     ingest::style_name(static_cast<ingest::Style>(style)) + "\n";
  }

  {
    std::FILE* f = std::fopen((out_dir / "manifest.tsv").string().c_str(), "wb");
    if (!f) throw DataError("cannot write manifest under " + out_dir.string());
    std::fwrite(manifest_text.data(), 1, manifest_text.size(), f);
    std::fclose(f);
  }
  return ingest::load_manifest(out_dir / "manifest.tsv");
}

std::pair<MatrixXd, MatrixXd> generate_gaussian_views(
    int n, int d_x, int d_y, const std::vector<double>& planted_corrs,
    std::uint64_t seed) {
  const int k = static_cast<int>(planted_corrs.size());
  if (k < 1 || k > std::min(d_x, d_y))
    throw ConfigError("planted correlation count must lie in [1, min(d_x, d_y)]");
  for (double c : planted_corrs)
    if (c < 0.0 || c > 1.0) throw ConfigError("planted correlations must lie in [0, 1]");
  if (n < 2) throw ConfigError("need at least two samples");

  Rng rng(seed);
  MatrixXd x0(n, d_x), y0(n, d_y);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d_x; ++j) x0(i, j) = rng.normal();
    for (int j = 0; j < d_y; ++j) y0(i, j) = rng.normal();
  }
  // overwrite the leading components with the shared latent mix
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      const double u = rng.normal();
      const double rho = planted_corrs[static_cast<std::size_t>(j)];
      x0(i, j) = std::sqrt(rho) * u + std::sqrt(1.0 - rho) * x0(i, j);
      y0(i, j) = std::sqrt(rho) * u + std::sqrt(1.0 - rho) * y0(i, j);
    }
  }

  // hide the structure behind orthogonal mixing
  MatrixXd gx(d_x, d_x), gy(d_y, d_y);
  for (int i = 0; i < d_x; ++i)
    for (int j = 0; j < d_x; ++j) gx(i, j) = rng.normal();
  for (int i = 0; i < d_y; ++i)
    for (int j = 0; j < d_y; ++j) gy(i, j) = rng.normal();
  const MatrixXd qx = Eigen::HouseholderQR<MatrixXd>(gx).householderQ();
  const MatrixXd qy = Eigen::HouseholderQR<MatrixXd>(gy).householderQ();
  return {x0 * qx, y0 * qy};
}

}  // namespace musedance::synth
