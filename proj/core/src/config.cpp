#include "musedance/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "musedance/common.hpp"

namespace musedance::config {

using nlohmann::json;

audiofeat::MelConfig RunConfig::mel_config() const {
  audiofeat::MelConfig mc;
  mc.sample_rate = sample_rate;
  mc.frame_len = static_cast<int>(std::lround(frame_ms * sample_rate / 1000.0));
  mc.hop = static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
  mc.fft_size = fft_size;
  mc.n_mels = n_mels;
  mc.fmin = mel_fmin;
  mc.fmax = mel_fmax;
  mc.log_floor = log_floor;
  return mc;
}

int RunConfig::pose_frames() const {
  return static_cast<int>(std::lround(pose_fps * clip_seconds));
}

void RunConfig::validate() const {
  mel_config().validate();
  if (alpha <= 0.0 || epsilon <= 0.0) throw ConfigError("alpha and epsilon must be positive");
  if (audio_seg_len <= 0 || audio_seg_hop <= 0 || move_seg_len <= 0 || move_seg_hop <= 0)
    throw ConfigError("segment lengths and hops must be positive");
  if (r_reg < 0.0) throw ConfigError("r_reg must be non-negative");
  if (cca_k < 1) throw ConfigError("cca_k must be positive");
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (runs_per_fold < 1) throw ConfigError("runs_per_fold must be positive");
  if (n_perm < 1) throw ConfigError("n_perm must be positive");
  if (mc_samples < 1000) throw ConfigError("mc_samples must be at least 1000");
  if (workers < 0) throw ConfigError("workers must be non-negative");
  if (optimizer != "adam" && optimizer != "sgd")
    throw ConfigError("optimizer must be 'adam' or 'sgd'");
}

namespace {

json to_json(const RunConfig& c) {
  return json{{"manifest", c.manifest},
              {"cache_dir", c.cache_dir},
              {"checkpoint_dir", c.checkpoint_dir},
              {"sample_rate", c.sample_rate},
              {"frame_ms", c.frame_ms},
              {"hop_ms", c.hop_ms},
              {"fft_size", c.fft_size},
              {"n_mels", c.n_mels},
              {"mel_fmin", c.mel_fmin},
              {"mel_fmax", c.mel_fmax},
              {"log_floor", c.log_floor},
              {"audio_seg_len", c.audio_seg_len},
              {"audio_seg_hop", c.audio_seg_hop},
              {"alpha", c.alpha},
              {"epsilon", c.epsilon},
              {"target_frame", c.target_frame},
              {"pose_fps", c.pose_fps},
              {"clip_seconds", c.clip_seconds},
              {"move_seg_len", c.move_seg_len},
              {"move_seg_hop", c.move_seg_hop},
              {"r_reg", c.r_reg},
              {"cca_k", c.cca_k},
              {"optimizer", c.optimizer},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"bn_eps", c.bn_eps},
              {"bn_momentum", c.bn_momentum},
              {"folds", c.folds},
              {"runs_per_fold", c.runs_per_fold},
              {"seed", c.seed},
              {"fold_seed", c.fold_seed},
              {"n_perm", c.n_perm},
              {"mc_samples", c.mc_samples},
              {"workers", c.workers}};
}

template <typename T>
void pick(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string RunConfig::canonical_json() const { return to_json(*this).dump(); }

std::string RunConfig::config_hash() const { return hex64(fnv1a64(canonical_json())); }

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  const json known = to_json(RunConfig{});
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");

  RunConfig c;
  try {
    pick(j, "manifest", c.manifest);
    pick(j, "cache_dir", c.cache_dir);
    pick(j, "checkpoint_dir", c.checkpoint_dir);
    pick(j, "sample_rate", c.sample_rate);
    pick(j, "frame_ms", c.frame_ms);
    pick(j, "hop_ms", c.hop_ms);
    pick(j, "fft_size", c.fft_size);
    pick(j, "n_mels", c.n_mels);
    pick(j, "mel_fmin", c.mel_fmin);
    pick(j, "mel_fmax", c.mel_fmax);
    pick(j, "log_floor", c.log_floor);
    pick(j, "audio_seg_len", c.audio_seg_len);
    pick(j, "audio_seg_hop", c.audio_seg_hop);
    pick(j, "alpha", c.alpha);
    pick(j, "epsilon", c.epsilon);
    pick(j, "target_frame", c.target_frame);
    pick(j, "pose_fps", c.pose_fps);
    pick(j, "clip_seconds", c.clip_seconds);
    pick(j, "move_seg_len", c.move_seg_len);
    pick(j, "move_seg_hop", c.move_seg_hop);
    pick(j, "r_reg", c.r_reg);
    pick(j, "cca_k", c.cca_k);
    pick(j, "optimizer", c.optimizer);
    pick(j, "lr", c.lr);
    pick(j, "beta1", c.beta1);
    pick(j, "beta2", c.beta2);
    pick(j, "adam_eps", c.adam_eps);
    pick(j, "batch_size", c.batch_size);
    pick(j, "epochs", c.epochs);
    pick(j, "bn_eps", c.bn_eps);
    pick(j, "bn_momentum", c.bn_momentum);
    pick(j, "folds", c.folds);
    pick(j, "runs_per_fold", c.runs_per_fold);
    pick(j, "seed", c.seed);
    pick(j, "fold_seed", c.fold_seed);
    pick(j, "n_perm", c.n_perm);
    pick(j, "mc_samples", c.mc_samples);
    pick(j, "workers", c.workers);
  } catch (const json::exception& e) {
    throw ConfigError("config value error in " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

}  // namespace musedance::config
