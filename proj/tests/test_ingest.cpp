#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "musedance/common.hpp"
#include "musedance/ingest.hpp"
#include "musedance/wav.hpp"
#include "testutil.hpp"

using namespace musedance;
using namespace musedance::ingest;
using testutil::TmpDir;

namespace {

void touch(const std::filesystem::path& p) { std::ofstream(p).put('\n'); }

// id_0000..id_NNNN cycling through all ten styles
std::filesystem::path write_manifest(const TmpDir& dir, int rows) {
  const auto manifest = dir.path() / "manifest.tsv";
  std::ofstream out(manifest);
  for (int i = 0; i < rows; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "id_%04d", i);
    const std::string audio = std::string(id) + ".wav";
    const std::string pose = std::string(id) + ".txt";
    touch(dir.path() / audio);
    touch(dir.path() / pose);
    out << id << "\t" << audio << "\t" << pose << "\t"
        << style_name(static_cast<Style>(i % kNumStyles)) << "\n";
  }
  return manifest;
}

PoseTrack random_track(int frames, std::uint64_t seed) {
  Rng rng(seed);
  PoseTrack t;
  t.frames.resize(static_cast<std::size_t>(frames));
  for (auto& f : t.frames)
    for (auto& p : f) {
      p.x = rng.uniform(0.0, 1280.0);
      p.y = rng.uniform(0.0, 720.0);
    }
  return t;
}

}  // namespace

TEST_CASE("manifest: full dataset loads with all styles") {
  TmpDir dir("manifest");
  const auto path = write_manifest(dir, 592);
  const DatasetManifest m = load_manifest(path);
  CHECK(m.entries.size() == 592);
  std::set<Style> styles;
  for (const auto& e : m.entries) styles.insert(e.style);
  CHECK(styles.size() == kNumStyles);
  CHECK(m.entries.front().audio_path.is_absolute() ==
        (dir.path() / "id_0000.wav").is_absolute());
}

TEST_CASE("manifest: empty file is rejected") {
  TmpDir dir("manifest_empty");
  const auto path = dir.path() / "manifest.tsv";
  std::ofstream(path).flush();
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("empty manifest"),
                       DataError);
}

TEST_CASE("manifest: unknown style names the offending row") {
  TmpDir dir("manifest_style");
  const auto path = dir.path() / "manifest.tsv";
  touch(dir.path() / "a.wav");
  touch(dir.path() / "a.txt");
  touch(dir.path() / "b.wav");
  touch(dir.path() / "b.txt");
  std::ofstream out(path);
  out << "a\ta.wav\ta.txt\tballet\n";
  out << "b\tb.wav\tb.txt\tpolka\n";
  out.close();
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("row 2"), DataError);
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("polka"), DataError);
}

TEST_CASE("manifest: duplicate ids and missing files are rejected") {
  TmpDir dir("manifest_dup");
  const auto path = dir.path() / "manifest.tsv";
  touch(dir.path() / "a.wav");
  touch(dir.path() / "a.txt");
  touch(dir.path() / "b.wav");
  touch(dir.path() / "b.txt");
  {
    std::ofstream out(path);
    out << "a\ta.wav\ta.txt\tballet\n";
    out << "a\tb.wav\tb.txt\twaltz\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("duplicate clip id"),
                       DataError);
  {
    std::ofstream out(path, std::ios::trunc);
    out << "a\ta.wav\ta.txt\tballet\n";
    out << "b\tmissing.wav\tb.txt\twaltz\n";
  }
  CHECK_THROWS_AS(load_manifest(path), DataError);
}

TEST_CASE("pose track: write/load round-trip is the identity") {
  TmpDir dir("pose_rt");
  const PoseTrack t = random_track(300, 7);
  const auto path = dir.path() / "t.txt";
  write_pose_track(path, t);
  const PoseTrack back = load_pose_track(path, 300);
  REQUIRE(back.frames.size() == t.frames.size());
  CHECK(back.fps == t.fps);
  CHECK(back.frame_width == t.frame_width);
  CHECK(back.frame_height == t.frame_height);
  for (std::size_t i = 0; i < t.frames.size(); ++i)
    for (int k = 0; k < kNumKeypoints; ++k) {
      CHECK(back.frames[i][static_cast<std::size_t>(k)].x ==
            t.frames[i][static_cast<std::size_t>(k)].x);
      CHECK(back.frames[i][static_cast<std::size_t>(k)].y ==
            t.frames[i][static_cast<std::size_t>(k)].y);
    }
}

TEST_CASE("pose track: short tracks and missing keypoints are incomplete") {
  TmpDir dir("pose_bad");
  const auto path = dir.path() / "t.txt";
  write_pose_track(path, random_track(299, 3));
  CHECK_THROWS_AS(load_pose_track(path, 300), IncompleteTrack);

  // drop the left wrist (two values) from one frame
  write_pose_track(path, random_track(300, 3));
  std::ifstream in(path);
  std::string all, line;
  int row = 0;
  while (std::getline(in, line)) {
    if (row == 5) {
      const auto pos = line.rfind(' ');
      const auto pos2 = line.rfind(' ', pos - 1);
      line = line.substr(0, pos2);
    }
    all += line + "\n";
    ++row;
  }
  in.close();
  std::ofstream(path, std::ios::trunc) << all;
  CHECK_THROWS_AS(load_pose_track(path, 300), IncompleteTrack);
}

TEST_CASE("audio: 10 s 16 kHz mono loads to 160000 samples") {
  TmpDir dir("audio16k");
  const auto path = dir.path() / "c.wav";
  write_wav_pcm16(path, testutil::sine_wave(440.0, 0.5, 160000, 16000), 16000);
  const AudioClip clip = load_audio(path);
  CHECK(clip.sample_rate == 16000);
  CHECK(clip.samples.size() == 160000);
}

TEST_CASE("audio: 44.1 kHz stereo resamples to 160000 mono samples") {
  TmpDir dir("audio441");
  const auto path = dir.path() / "c.wav";
  // interleaved stereo, both channels the same 1 kHz tone
  const auto mono = testutil::sine_wave(1000.0, 0.5, 441000, 44100);
  std::ofstream out(path, std::ios::binary);
  auto w32 = [&](std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
  auto w16 = [&](std::uint16_t v) { out.write(reinterpret_cast<char*>(&v), 2); };
  out.write("RIFF", 4);
  w32(36 + 441000 * 4);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  w32(16);
  w16(1);
  w16(2);
  w32(44100);
  w32(44100 * 4);
  w16(4);
  w16(16);
  out.write("data", 4);
  w32(441000 * 4);
  for (double v : mono) {
    auto q = static_cast<std::int16_t>(std::lrint(v * 32767.0));
    out.write(reinterpret_cast<char*>(&q), 2);
    out.write(reinterpret_cast<char*>(&q), 2);
  }
  out.close();

  const AudioClip clip = load_audio(path);
  CHECK(clip.samples.size() == 160000);

  // mid-section should track an ideal 16 kHz rendering of the same tone
  const auto ideal = testutil::sine_wave(1000.0, 0.5, 160000, 16000);
  double max_err = 0.0;
  for (int i = 40000; i < 120000; ++i)
    max_err = std::max(max_err, std::abs(clip.samples[static_cast<std::size_t>(i)] -
                                         ideal[static_cast<std::size_t>(i)]));
  CHECK(max_err < 0.02);
}

TEST_CASE("audio: corrupt header and off-duration clips are rejected") {
  TmpDir dir("audio_bad");
  const auto path = dir.path() / "c.wav";
  std::ofstream(path, std::ios::binary) << "definitely not a wav file";
  CHECK_THROWS_AS(load_audio(path), DataError);

  write_wav_pcm16(path, testutil::sine_wave(440.0, 0.5, 80000, 16000), 16000);
  CHECK_THROWS_AS(load_audio(path), DataError);          // 5 s clip
  CHECK_NOTHROW(load_audio_any_duration(path));
}

TEST_CASE("folds: 592 clips split into four folds of 148") {
  TmpDir dir("folds592");
  const DatasetManifest m = load_manifest(write_manifest(dir, 592));
  const FoldAssignment fa = stratified_folds(m, 4, 11);
  const auto sizes = fa.fold_sizes();
  REQUIRE(sizes.size() == 4);
  for (int s : sizes) CHECK(s == 148);

  // per-style counts differ by at most one across folds
  std::map<Style, std::map<int, int>> counts;
  for (const auto& e : m.entries) counts[e.style][fa.fold_of.at(e.clip_id)]++;
  for (const auto& [style, per_fold] : counts) {
    int lo = 1 << 30, hi = 0;
    for (int f = 0; f < 4; ++f) {
      const int c = per_fold.count(f) ? per_fold.at(f) : 0;
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("folds: one-per-fold, determinism, and too-small styles") {
  TmpDir dir("folds_small");
  const auto path = dir.path() / "manifest.tsv";
  {
    std::ofstream out(path);
    for (int i = 0; i < 4; ++i) {
      const std::string id = "w" + std::to_string(i);
      touch(dir.path() / (id + ".wav"));
      touch(dir.path() / (id + ".txt"));
      out << id << "\t" << id << ".wav\t" << id << ".txt\twaltz\n";
    }
  }
  const DatasetManifest m = load_manifest(path);
  const FoldAssignment fa = stratified_folds(m, 4, 5);
  std::set<int> folds;
  for (const auto& [id, f] : fa.fold_of) folds.insert(f);
  CHECK(folds.size() == 4);  // one clip per fold

  const FoldAssignment fb = stratified_folds(m, 4, 5);
  CHECK(fa.fold_of == fb.fold_of);
  CHECK(fa.content_hash() == fb.content_hash());
  const FoldAssignment fc = stratified_folds(m, 4, 6);
  CHECK(fa.content_hash() != fc.content_hash());

  CHECK_THROWS_AS(stratified_folds(m, 5, 1), DataError);  // 4 waltz clips, k=5
}

TEST_CASE("folds: fold sizes always sum to the manifest size") {
  TmpDir dir("folds_sum");
  const DatasetManifest m = load_manifest(write_manifest(dir, 123));
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const FoldAssignment fa = stratified_folds(m, 4, seed);
    int total = 0;
    for (int s : fa.fold_sizes()) total += s;
    CHECK(total == 123);
  }
}
