#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace musedance::ingest {

enum class Style : int {
  ballet,
  breakdance,
  flamenco,
  foxtrot,
  latin,
  quickstep,
  square,
  swing,
  tango,
  waltz,
};

inline constexpr int kNumStyles = 10;

const std::string& style_name(Style s);
std::optional<Style> parse_style(const std::string& name);

enum class Keypoint : int {
  head,
  neck,
  shoulder_l,
  shoulder_r,
  elbow_l,
  elbow_r,
  wrist_l,
  wrist_r,
  hip_l,
  hip_r,
  knee_l,
  knee_r,
  ankle_l,
  ankle_r,
};

inline constexpr int kNumKeypoints = 14;

const std::string& keypoint_name(Keypoint k);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// One frame of 2D joint positions, pixel coordinates, y grows downward.
using SkeletonFrame = std::array<Point2, kNumKeypoints>;

struct PoseTrack {
  int fps = 30;
  int frame_width = 1280;
  int frame_height = 720;
  std::vector<SkeletonFrame> frames;
};

struct AudioClip {
  std::vector<double> samples;  // mono, [-1, 1]
  int sample_rate = 16000;
};

struct ManifestEntry {
  std::string clip_id;
  std::filesystem::path audio_path;
  std::filesystem::path pose_path;
  Style style = Style::ballet;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  const ManifestEntry& entry(const std::string& clip_id) const;
  bool contains(const std::string& clip_id) const;
};

// Manifest format: UTF-8, one record per line,
//   clip_id<TAB>audio_path<TAB>pose_path<TAB>style
// Relative paths are resolved against the manifest's directory. Every
// referenced file must exist.
DatasetManifest load_manifest(const std::filesystem::path& path);

// Pose track format: header "fps=30 width=1280 height=720 frames=300", then
// one line per frame with 28 space-separated decimals, x then y for each
// keypoint in declaration order. Any missing frame, short line, or non-finite
// value raises IncompleteTrack: the clip has to be excluded.
PoseTrack load_pose_track(const std::filesystem::path& path, int expected_frames);
void write_pose_track(const std::filesystem::path& path, const PoseTrack& track);

// Loads a PCM WAV, averages channels to mono and resamples to 16 kHz.
// Enforces the 10 s +- one hop duration contract (160,000 samples nominal);
// clips inside the tolerance are standardized to exactly 160,000 samples.
AudioClip load_audio(const std::filesystem::path& path);

// Same loader without the duration contract, for query files of any length.
AudioClip load_audio_any_duration(const std::filesystem::path& path);

struct FoldAssignment {
  std::map<std::string, int> fold_of;
  std::uint64_t seed = 0;
  int k = 0;

  std::vector<std::string> ids_in_fold(int fold) const;
  std::vector<std::string> ids_not_in_fold(int fold) const;
  std::vector<int> fold_sizes() const;
  std::uint64_t content_hash() const;
};

// Stratified k-fold split. Clip ids are sorted, shuffled within style by the
// seed, then dealt round-robin with a counter running across styles, so
// per-style fold counts differ by at most one.
FoldAssignment stratified_folds(const DatasetManifest& manifest, int k,
                                std::uint64_t seed);

}  // namespace musedance::ingest
