#include "musedance/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "musedance/common.hpp"
#include "musedance/wav.hpp"

namespace musedance::ingest {

namespace {

const std::array<std::string, kNumStyles> kStyleNames = {
    "ballet", "breakdance", "flamenco", "foxtrot", "latin",
    "quickstep", "square", "swing", "tango", "waltz"};

const std::array<std::string, kNumKeypoints> kKeypointNames = {
    "head",    "neck",    "shoulder_l", "shoulder_r", "elbow_l",
    "elbow_r", "wrist_l", "wrist_r",    "hip_l",      "hip_r",
    "knee_l",  "knee_r",  "ankle_l",    "ankle_r"};

constexpr int kClipSamples = 160000;  // 10 s at 16 kHz
constexpr int kHopSamples = 400;      // 25 ms

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path fp(p);
  if (fp.is_absolute()) return fp;
  return base / fp;
}

}  // namespace

const std::string& style_name(Style s) {
  return kStyleNames[static_cast<std::size_t>(s)];
}

std::optional<Style> parse_style(const std::string& name) {
  for (int i = 0; i < kNumStyles; ++i)
    if (kStyleNames[static_cast<std::size_t>(i)] == name) return static_cast<Style>(i);
  return std::nullopt;
}

const std::string& keypoint_name(Keypoint k) {
  return kKeypointNames[static_cast<std::size_t>(k)];
}

const ManifestEntry& DatasetManifest::entry(const std::string& clip_id) const {
  for (const auto& e : entries)
    if (e.clip_id == clip_id) return e;
  throw DataError("clip id not in manifest: " + clip_id);
}

bool DatasetManifest::contains(const std::string& clip_id) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const ManifestEntry& e) { return e.clip_id == clip_id; });
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  const auto base = path.has_parent_path() ? path.parent_path()
                                           : std::filesystem::path(".");

  DatasetManifest m;
  std::set<std::string> ids, audio_paths, pose_paths;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::array<std::string, 4> field;
    std::size_t start = 0;
    int nf = 0;
    for (; nf < 4; ++nf) {
      std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        field[static_cast<std::size_t>(nf)] = line.substr(start);
        ++nf;
        break;
      }
      field[static_cast<std::size_t>(nf)] = line.substr(start, tab - start);
      start = tab + 1;
    }
    if (nf != 4)
      throw DataError("manifest row " + std::to_string(row) +
                      ": expected 4 tab-separated fields");

    ManifestEntry e;
    e.clip_id = field[0];
    if (e.clip_id.empty())
      throw DataError("manifest row " + std::to_string(row) + ": empty clip id");
    if (!ids.insert(e.clip_id).second)
      throw DataError("manifest row " + std::to_string(row) +
                      ": duplicate clip id '" + e.clip_id + "'");
    if (!audio_paths.insert(field[1]).second)
      throw DataError("manifest row " + std::to_string(row) +
                      ": duplicate audio path '" + field[1] + "'");
    if (!pose_paths.insert(field[2]).second)
      throw DataError("manifest row " + std::to_string(row) +
                      ": duplicate pose path '" + field[2] + "'");
    auto style = parse_style(field[3]);
    if (!style)
      throw DataError("manifest row " + std::to_string(row) +
                      " (clip '" + e.clip_id + "'): unknown style '" + field[3] + "'");
    e.style = *style;
    e.audio_path = resolve(base, field[1]);
    e.pose_path = resolve(base, field[2]);
    if (!std::filesystem::exists(e.audio_path))
      throw DataError("manifest row " + std::to_string(row) +
                      ": missing audio file " + e.audio_path.string());
    if (!std::filesystem::exists(e.pose_path))
      throw DataError("manifest row " + std::to_string(row) +
                      ": missing pose file " + e.pose_path.string());
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw DataError("empty manifest: " + path.string());
  return m;
}

PoseTrack load_pose_track(const std::filesystem::path& path, int expected_frames) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pose track: " + path.string());

  std::string header;
  if (!std::getline(in, header))
    throw IncompleteTrack("empty pose track: " + path.string());

  PoseTrack t;
  int frames_declared = -1;
  if (std::sscanf(header.c_str(), "fps=%d width=%d height=%d frames=%d", &t.fps,
                  &t.frame_width, &t.frame_height, &frames_declared) != 4)
    throw DataError("malformed pose header '" + header + "' in " + path.string());

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    SkeletonFrame f;
    for (int k = 0; k < kNumKeypoints; ++k) {
      if (!(ls >> f[static_cast<std::size_t>(k)].x >> f[static_cast<std::size_t>(k)].y))
        throw IncompleteTrack("pose track " + path.string() + ": frame " +
                              std::to_string(t.frames.size()) + " is missing keypoints");
      const auto& p = f[static_cast<std::size_t>(k)];
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw IncompleteTrack("pose track " + path.string() + ": frame " +
                              std::to_string(t.frames.size()) + " has non-finite values");
    }
    double extra;
    if (ls >> extra)
      throw DataError("pose track " + path.string() + ": frame " +
                      std::to_string(t.frames.size()) + " has extra values");
    t.frames.push_back(f);
  }

  if (static_cast<int>(t.frames.size()) != expected_frames ||
      frames_declared != expected_frames)
    throw IncompleteTrack("pose track " + path.string() + ": expected " +
                          std::to_string(expected_frames) + " frames, found " +
                          std::to_string(t.frames.size()) + " (declared " +
                          std::to_string(frames_declared) + ")");
  return t;
}

void write_pose_track(const std::filesystem::path& path, const PoseTrack& track) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open pose track for writing: " + path.string());
  out << "fps=" << track.fps << " width=" << track.frame_width
      << " height=" << track.frame_height << " frames=" << track.frames.size() << "\n";
  char buf[32];
  for (const auto& f : track.frames) {
    for (int k = 0; k < kNumKeypoints; ++k) {
      const auto& p = f[static_cast<std::size_t>(k)];
      std::snprintf(buf, sizeof(buf), "%.17g", p.x);
      out << (k == 0 ? "" : " ") << buf;
      std::snprintf(buf, sizeof(buf), "%.17g", p.y);
      out << " " << buf;
    }
    out << "\n";
  }
  if (!out) throw DataError("short write on pose track: " + path.string());
}

namespace {

AudioClip load_audio_impl(const std::filesystem::path& path, bool enforce_duration) {
  RawAudio raw = read_wav(path);
  std::vector<double> samples = std::move(raw.samples);
  if (raw.sample_rate != 16000) samples = resample_sinc(samples, raw.sample_rate, 16000);
  if (samples.empty()) throw DataError("zero-length audio: " + path.string());

  if (enforce_duration) {
    const auto n = static_cast<long>(samples.size());
    if (n < kClipSamples - kHopSamples || n > kClipSamples + kHopSamples)
      throw DataError("clip duration out of range (10 s +- one hop expected): " +
                      path.string() + " has " + std::to_string(n) + " samples");
    samples.resize(kClipSamples, 0.0);  // trim or zero-pad within the tolerance
  }
  return AudioClip{std::move(samples), 16000};
}

}  // namespace

AudioClip load_audio(const std::filesystem::path& path) {
  return load_audio_impl(path, true);
}

AudioClip load_audio_any_duration(const std::filesystem::path& path) {
  return load_audio_impl(path, false);
}

std::vector<std::string> FoldAssignment::ids_in_fold(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : fold_of)
    if (f == fold) out.push_back(id);
  return out;
}

std::vector<std::string> FoldAssignment::ids_not_in_fold(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : fold_of)
    if (f != fold) out.push_back(id);
  return out;
}

std::vector<int> FoldAssignment::fold_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (const auto& [id, f] : fold_of) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

std::uint64_t FoldAssignment::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [id, f] : fold_of) {
    h = fnv1a64(id.data(), id.size(), h);
    h = fnv1a64(&f, sizeof(f), h);
  }
  return h;
}

FoldAssignment stratified_folds(const DatasetManifest& manifest, int k,
                                std::uint64_t seed) {
  if (manifest.entries.empty()) throw DataError("cannot fold an empty manifest");
  if (k < 2) throw ConfigError("fold count must be at least 2");

  std::map<Style, std::vector<std::string>> by_style;
  for (const auto& e : manifest.entries) by_style[e.style].push_back(e.clip_id);

  FoldAssignment fa;
  fa.seed = seed;
  fa.k = k;
  Rng rng(seed);
  int counter = 0;
  for (auto& [style, ids] : by_style) {
    if (static_cast<int>(ids.size()) < k)
      throw DataError("style '" + style_name(style) + "' has " +
                      std::to_string(ids.size()) + " clips, fewer than " +
                      std::to_string(k) + " folds");
    std::sort(ids.begin(), ids.end());
    rng.shuffle(ids);
    for (const auto& id : ids) fa.fold_of[id] = counter++ % k;
  }
  return fa;
}

}  // namespace musedance::ingest
