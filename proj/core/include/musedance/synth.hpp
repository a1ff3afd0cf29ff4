#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "musedance/ingest.hpp"

namespace musedance::synth {

struct SynthConfig {
  int n_objects = 200;
  int latent_dim = 4;      // <= 32
  double noise_sigma = 3.0;  // pixel std of per-frame pose jitter
  int styles = 4;            // <= 10, uses the leading dance style labels
  std::uint64_t seed = 1;

  void validate() const;
};

// A shared latent vector per object drives both a summed amplitude-modulated
// tone waveform and a skeleton whose joint oscillations encode the same
// latent. Writes audio/, pose/ and manifest.tsv under out_dir; byte-identical
// across runs for a fixed config.
ingest::DatasetManifest generate_dataset(const SynthConfig& cfg,
                                         const std::filesystem::path& out_dir);

// The tone carrier assigned to latent component j.
double tone_frequency(const SynthConfig& cfg, int j);

// The pose coordinate whose oscillation amplitude encodes latent component j:
// (keypoint, true when the y coordinate is driven, oscillation frequency is
// style-dependent and returned by pose_rate()).
std::pair<ingest::Keypoint, bool> driven_coordinate(const SynthConfig& cfg, int j);

// Oscillation rate (Hz) of a style's movements.
double pose_rate(const SynthConfig& cfg, int style_index);

// Jointly Gaussian views with population canonical correlations equal to
// planted_corrs, hidden behind orthogonal mixing.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> generate_gaussian_views(
    int n, int d_x, int d_y, const std::vector<double>& planted_corrs,
    std::uint64_t seed);

}  // namespace musedance::synth
