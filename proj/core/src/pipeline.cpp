#include "musedance/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "musedance/audiofeat.hpp"
#include "musedance/common.hpp"
#include "musedance/dcca.hpp"
#include "musedance/matio.hpp"
#include "musedance/nnet.hpp"
#include "musedance/posefeat.hpp"

namespace musedance::pipeline {

namespace {

using config::RunConfig;
using Eigen::MatrixXd;
using Eigen::MatrixXf;

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Hash of every config field that changes extracted features.
std::string feature_hash(const RunConfig& cfg, const std::string& target_frame) {
  std::ostringstream os;
  os << cfg.sample_rate << "|" << cfg.frame_ms << "|" << cfg.hop_ms << "|"
     << cfg.fft_size << "|" << cfg.n_mels << "|" << cfg.mel_fmin << "|" << cfg.mel_fmax
     << "|" << cfg.log_floor << "|" << cfg.audio_seg_len << "|" << cfg.audio_seg_hop
     << "|" << cfg.alpha << "|" << cfg.epsilon << "|" << cfg.pose_fps << "|"
     << cfg.clip_seconds << "|" << cfg.move_seg_len << "|" << cfg.move_seg_hop << "|"
     << target_frame;
  return hex64(fnv1a64(os.str()));
}

int resolved_workers(const RunConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

bool sidecar_matches(const std::filesystem::path& cache,
                     const std::string& expected_hash) {
  std::ifstream in(cache.string() + ".src");
  if (!in) return false;
  std::string stored;
  in >> stored;
  return stored == expected_hash && std::filesystem::exists(cache);
}

void write_sidecar(const std::filesystem::path& cache, const std::string& hash) {
  std::ofstream out(cache.string() + ".src", std::ios::trunc);
  out << hash << "\n";
}

posefeat::NormalizationParams normalization_params(const RunConfig& cfg,
                                                   const ingest::ManifestEntry& target) {
  const ingest::PoseTrack track =
      ingest::load_pose_track(target.pose_path, cfg.pose_frames());
  posefeat::NormalizationParams params;
  params.alpha = cfg.alpha;
  params.epsilon = cfg.epsilon;
  params.target = posefeat::target_frame_stats(track, cfg.alpha, cfg.epsilon);
  return params;
}

// ---------------------------------------------------------------------------
// feature loading

struct ClipFeatures {
  MatrixXf audio;     // (19 * 39) x 128 stack
  MatrixXf movement;  // (19 * 30) x 119 stack
  int audio_segments = 0;
  int movement_segments = 0;
};

ClipFeatures load_clip_features(const RunConfig& cfg, const std::string& clip_id) {
  ClipFeatures f;
  f.audio = read_matrix_f32(audio_cache_path(cfg, clip_id));
  f.movement = read_matrix_f32(movement_cache_path(cfg, clip_id));
  if (f.audio.rows() % cfg.audio_seg_len != 0 || f.audio.cols() != cfg.n_mels)
    throw DataError("stale audio cache for clip '" + clip_id + "'");
  if (f.movement.rows() % cfg.move_seg_len != 0 ||
      f.movement.cols() != posefeat::kMovementFeatures)
    throw DataError("stale movement cache for clip '" + clip_id + "'");
  f.audio_segments = static_cast<int>(f.audio.rows()) / cfg.audio_seg_len;
  f.movement_segments = static_cast<int>(f.movement.rows()) / cfg.move_seg_len;
  if (f.audio_segments != f.movement_segments)
    throw DataError("segment count mismatch between views for clip '" + clip_id + "'");
  return f;
}

struct SegmentStore {
  std::vector<std::string> clip_ids;
  std::vector<ClipFeatures> clips;
  std::vector<std::pair<int, int>> index;  // (clip, segment)

  int total() const { return static_cast<int>(index.size()); }
};

SegmentStore load_segment_store(const RunConfig& cfg,
                                const std::vector<std::string>& ids) {
  SegmentStore store;
  store.clip_ids = ids;
  store.clips.reserve(ids.size());
  for (std::size_t c = 0; c < ids.size(); ++c) {
    store.clips.push_back(load_clip_features(cfg, ids[c]));
    for (int s = 0; s < store.clips.back().audio_segments; ++s)
      store.index.emplace_back(static_cast<int>(c), s);
  }
  return store;
}

void fill_batch(const RunConfig& cfg, const SegmentStore& store,
                const std::vector<int>& which, nnet::Tensor& audio,
                nnet::Tensor& movement) {
  const int b = static_cast<int>(which.size());
  audio = nnet::Tensor(b, cfg.audio_seg_len, cfg.n_mels, 1);
  movement = nnet::Tensor(b, cfg.move_seg_len, 1, posefeat::kMovementFeatures);
  for (int i = 0; i < b; ++i) {
    const auto [clip, seg] = store.index[static_cast<std::size_t>(which[static_cast<std::size_t>(i)])];
    const ClipFeatures& f = store.clips[static_cast<std::size_t>(clip)];
    for (int r = 0; r < cfg.audio_seg_len; ++r)
      for (int c = 0; c < cfg.n_mels; ++c)
        audio.at(i, r, c, 0) =
            static_cast<double>(f.audio(seg * cfg.audio_seg_len + r, c));
    for (int r = 0; r < cfg.move_seg_len; ++r)
      for (int c = 0; c < posefeat::kMovementFeatures; ++c)
        movement.at(i, r, 0, c) =
            static_cast<double>(f.movement(seg * cfg.move_seg_len + r, c));
  }
}

// eval-mode forward over every segment, in batch-size chunks
std::pair<MatrixXd, MatrixXd> forward_all(const RunConfig& cfg, const SegmentStore& store,
                                          nnet::Branch& audio_branch,
                                          nnet::Branch& movement_branch) {
  const int total = store.total();
  MatrixXd xa(total, audio_branch.output_dim());
  MatrixXd xm(total, movement_branch.output_dim());
  nnet::Tensor ta, tm;
  for (int start = 0; start < total; start += cfg.batch_size) {
    const int b = std::min(cfg.batch_size, total - start);
    std::vector<int> which(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) which[static_cast<std::size_t>(i)] = start + i;
    fill_batch(cfg, store, which, ta, tm);
    xa.middleRows(start, b) = audio_branch.forward(ta, nnet::Mode::eval);
    xm.middleRows(start, b) = movement_branch.forward(tm, nnet::Mode::eval);
  }
  return {xa, xm};
}

// ---------------------------------------------------------------------------
// checkpoint packing

void pack_branch(checkpoint::Checkpoint& ckpt, nnet::Branch& branch) {
  for (auto* p : branch.params()) {
    std::vector<std::int64_t> shape(p->shape.begin(), p->shape.end());
    ckpt.put(p->name, std::move(shape), p->value);
  }
}

void unpack_branch(const checkpoint::Checkpoint& ckpt, nnet::Branch& branch) {
  for (auto* p : branch.params()) {
    const auto& t = ckpt.get(p->name);
    if (t.data.size() != p->value.size())
      throw DataError("checkpoint tensor '" + p->name + "' has wrong size");
    p->value = t.data;
  }
}

void pack_cca(checkpoint::Checkpoint& ckpt, const dcca::CcaModel& model) {
  auto mat = [](const MatrixXd& m) {
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    for (long c = 0, i = 0; c < m.cols(); ++c)
      for (long r = 0; r < m.rows(); ++r) v[static_cast<std::size_t>(i++)] = m(r, c);
    return v;
  };
  ckpt.put("cca.w_x", {model.w_x.rows(), model.w_x.cols()}, mat(model.w_x));
  ckpt.put("cca.w_y", {model.w_y.rows(), model.w_y.cols()}, mat(model.w_y));
  ckpt.put("cca.mean_x", {model.mean_x.size()},
           std::vector<double>(model.mean_x.data(), model.mean_x.data() + model.mean_x.size()));
  ckpt.put("cca.mean_y", {model.mean_y.size()},
           std::vector<double>(model.mean_y.data(), model.mean_y.data() + model.mean_y.size()));
  ckpt.put("cca.corrs", {model.corrs.size()},
           std::vector<double>(model.corrs.data(), model.corrs.data() + model.corrs.size()));
  ckpt.meta["cca.k"] = std::to_string(model.k);
  ckpt.meta["cca.r_reg"] = std::to_string(model.r_reg);
}

dcca::CcaModel unpack_cca(const checkpoint::Checkpoint& ckpt) {
  auto mat = [&](const std::string& name) {
    const auto& t = ckpt.get(name);
    if (t.shape.size() != 2) throw DataError("tensor '" + name + "' is not a matrix");
    MatrixXd m(t.shape[0], t.shape[1]);
    for (long c = 0, i = 0; c < m.cols(); ++c)
      for (long r = 0; r < m.rows(); ++r) m(r, c) = t.data[static_cast<std::size_t>(i++)];
    return m;
  };
  auto vec = [&](const std::string& name) {
    const auto& t = ckpt.get(name);
    return Eigen::Map<const Eigen::VectorXd>(t.data.data(),
                                             static_cast<long>(t.data.size()))
        .eval();
  };
  dcca::CcaModel model;
  model.w_x = mat("cca.w_x");
  model.w_y = mat("cca.w_y");
  model.mean_x = vec("cca.mean_x");
  model.mean_y = vec("cca.mean_y");
  model.corrs = vec("cca.corrs");
  model.k = std::stoi(ckpt.meta.at("cca.k"));
  model.r_reg = std::stod(ckpt.meta.at("cca.r_reg"));
  return model;
}

// mean CCA projection of a clip's segments, one modality
Eigen::VectorXd clip_embedding(const MatrixXd& segment_outputs,
                               const dcca::CcaModel& model, dcca::View view) {
  return retrieval::object_embedding(dcca::project(model, segment_outputs, view));
}

}  // namespace

std::filesystem::path audio_cache_path(const RunConfig& cfg, const std::string& clip_id) {
  return std::filesystem::path(cfg.cache_dir) / (clip_id + ".audio.bin");
}

std::filesystem::path movement_cache_path(const RunConfig& cfg,
                                          const std::string& clip_id) {
  return std::filesystem::path(cfg.cache_dir) / (clip_id + ".move.bin");
}

std::string resolve_target_frame(const RunConfig& cfg,
                                 const ingest::DatasetManifest& manifest,
                                 const ingest::FoldAssignment& folds) {
  if (!cfg.target_frame.empty()) {
    if (!manifest.contains(cfg.target_frame))
      throw ConfigError("configured target frame '" + cfg.target_frame +
                        "' is not in the manifest");
    return cfg.target_frame;
  }
  const auto train_ids = folds.ids_not_in_fold(0);
  if (train_ids.empty()) throw DataError("fold assignment leaves no training clips");
  return *std::min_element(train_ids.begin(), train_ids.end());
}

ExtractResult extract_all(const RunConfig& cfg) {
  cfg.validate();
  const ingest::DatasetManifest manifest = ingest::load_manifest(cfg.manifest);
  const ingest::FoldAssignment folds =
      ingest::stratified_folds(manifest, cfg.folds, cfg.fold_seed);
  const std::string target_id = resolve_target_frame(cfg, manifest, folds);
  const std::string fhash = feature_hash(cfg, target_id);

  std::filesystem::create_directories(cfg.cache_dir);
  const posefeat::NormalizationParams params =
      normalization_params(cfg, manifest.entry(target_id));
  const audiofeat::MelConfig mel_cfg = cfg.mel_config();

  {
    std::ofstream meta(std::filesystem::path(cfg.cache_dir) / "extract_meta.txt",
                       std::ios::trunc);
    meta << "target_frame " << target_id << "\n";
    meta << "feature_hash " << fhash << "\n";
    meta << "fold_seed " << cfg.fold_seed << "\n";
  }

  ExtractResult result;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  const int n_workers =
      std::max(1, std::min(resolved_workers(cfg),
                           static_cast<int>(manifest.entries.size())));

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= manifest.entries.size()) return;
      const ingest::ManifestEntry& e = manifest.entries[i];
      try {
        const auto a_path = audio_cache_path(cfg, e.clip_id);
        const auto m_path = movement_cache_path(cfg, e.clip_id);
        const std::string a_hash =
            hex64(hash_file(e.audio_path) ^ fnv1a64(fhash));
        const std::string m_hash =
            hex64(hash_file(e.pose_path) ^ fnv1a64(fhash));
        const bool a_fresh = sidecar_matches(a_path, a_hash);
        const bool m_fresh = sidecar_matches(m_path, m_hash);
        if (a_fresh && m_fresh) {
          std::lock_guard lock(mu);
          ++result.skipped;
          continue;
        }
        if (!a_fresh) {
          const ingest::AudioClip clip = ingest::load_audio(e.audio_path);
          const MatrixXd mel = audiofeat::mel_spectrogram(clip, mel_cfg);
          const auto segs = audiofeat::segment_features(mel, cfg.audio_seg_len,
                                                        cfg.audio_seg_hop, e.clip_id);
          audiofeat::write_segment_cache(a_path, segs);
          write_sidecar(a_path, a_hash);
        }
        if (!m_fresh) {
          const ingest::PoseTrack track =
              ingest::load_pose_track(e.pose_path, cfg.pose_frames());
          const ingest::PoseTrack norm = posefeat::normalize_track(track, params);
          const MatrixXd feats = posefeat::derive_movement_features(norm);
          const auto segs = audiofeat::segment_features(feats, cfg.move_seg_len,
                                                        cfg.move_seg_hop, e.clip_id);
          audiofeat::write_segment_cache(m_path, segs);
          write_sidecar(m_path, m_hash);
        }
        std::lock_guard lock(mu);
        ++result.written;
      } catch (const std::exception& ex) {
        std::lock_guard lock(mu);
        result.failures.emplace_back(e.clip_id, ex.what());
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return result;
}

std::uint64_t run_seed(const RunConfig& cfg, int run) {
  return cfg.seed + 7919ull * static_cast<std::uint64_t>(run);
}

TrainResult train_fold(const RunConfig& cfg, int fold, int run) {
  cfg.validate();
  if (cfg.batch_size < config::kMinDccaBatch)
    throw ConfigError("batch_size " + std::to_string(cfg.batch_size) +
                      " is below the enforced minimum of " +
                      std::to_string(config::kMinDccaBatch));
  if (cfg.cca_k > 32)
    throw ConfigError("cca_k exceeds the movement branch dimensionality (32)");

  const ingest::DatasetManifest manifest = ingest::load_manifest(cfg.manifest);
  const ingest::FoldAssignment folds =
      ingest::stratified_folds(manifest, cfg.folds, cfg.fold_seed);
  if (fold < 0 || fold >= cfg.folds) throw ConfigError("fold index out of range");
  const std::string target_id = resolve_target_frame(cfg, manifest, folds);
  const std::vector<std::string> train_ids = folds.ids_not_in_fold(fold);

  SegmentStore store = load_segment_store(cfg, train_ids);
  if (store.total() < config::kMinDccaBatch)
    throw DataError("training set has only " + std::to_string(store.total()) +
                    " segments; need at least " + std::to_string(config::kMinDccaBatch));

  const std::uint64_t seed = run_seed(cfg, run);
  Rng rng(seed);
  nnet::Branch audio_branch = nnet::Branch::audio(cfg.bn_eps, cfg.bn_momentum);
  nnet::Branch movement_branch = nnet::Branch::movement(cfg.bn_eps, cfg.bn_momentum);
  audio_branch.init_params(rng);
  movement_branch.init_params(rng);

  std::vector<nnet::ParamTensor*> all_params = audio_branch.params();
  for (auto* p : movement_branch.params()) all_params.push_back(p);

  nnet::OptimizerConfig ocfg;
  ocfg.kind = cfg.optimizer;
  ocfg.lr = cfg.lr;
  ocfg.beta1 = cfg.beta1;
  ocfg.beta2 = cfg.beta2;
  ocfg.eps = cfg.adam_eps;
  nnet::Optimizer opt(ocfg);

  std::vector<double> loss_history;
  std::vector<int> order(static_cast<std::size_t>(store.total()));
  for (int i = 0; i < store.total(); ++i) order[static_cast<std::size_t>(i)] = i;

  nnet::Tensor ta, tm;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    long used = 0;
    for (int start = 0; start < store.total();) {
      const int remaining = store.total() - start;
      int b = std::min(cfg.batch_size, remaining);
      if (b < config::kMinDccaBatch) break;  // drop a too-small tail batch
      std::vector<int> which(order.begin() + start, order.begin() + start + b);
      fill_batch(cfg, store, which, ta, tm);

      const MatrixXd xa = audio_branch.forward(ta, nnet::Mode::train);
      const MatrixXd xm = movement_branch.forward(tm, nnet::Mode::train);
      const dcca::LossGrad lg = dcca::dcca_gradient(xa, xm, cfg.r_reg);
      if (!std::isfinite(lg.loss))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch));

      for (auto* p : all_params) p->zero_grad();
      audio_branch.backward(lg.dx);
      movement_branch.backward(lg.dy);
      opt.step(all_params);

      epoch_loss += lg.loss * b;
      used += b;
      start += b;
    }
    loss_history.push_back(epoch_loss / static_cast<double>(used));
  }

  // final train-set forward pass feeds the linear CCA fit
  const auto [xa_all, xm_all] = forward_all(cfg, store, audio_branch, movement_branch);
  const int k = std::min({cfg.cca_k, static_cast<int>(xa_all.cols()),
                          static_cast<int>(xm_all.cols())});
  const dcca::CcaModel cca = dcca::fit_linear_cca(xa_all, xm_all, k, cfg.r_reg);

  checkpoint::Checkpoint ckpt;
  ckpt.meta["schema"] = "1";
  ckpt.meta["config_hash"] = cfg.config_hash();
  ckpt.meta["fold"] = std::to_string(fold);
  ckpt.meta["run"] = std::to_string(run);
  ckpt.meta["seed"] = std::to_string(seed);
  ckpt.meta["target_frame"] = target_id;
  ckpt.meta["train_ids"] = join(train_ids, ',');
  {
    std::ostringstream os;
    for (std::size_t i = 0; i < loss_history.size(); ++i) {
      if (i) os << ",";
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", loss_history[i]);
      os << buf;
    }
    ckpt.meta["loss_history"] = os.str();
  }
  ckpt.meta["audio_params"] = std::to_string(audio_branch.total_param_count());
  ckpt.meta["movement_params"] = std::to_string(movement_branch.total_param_count());
  ckpt.meta["opt.step_count"] = std::to_string(opt.step_count());
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", cfg.bn_eps);
    ckpt.meta["bn_eps"] = buf;
    std::snprintf(buf, sizeof(buf), "%.17g", cfg.bn_momentum);
    ckpt.meta["bn_momentum"] = buf;
  }
  pack_branch(ckpt, audio_branch);
  pack_branch(ckpt, movement_branch);
  for (const auto& [name, buf] : opt.state())
    ckpt.put("opt." + name, {static_cast<std::int64_t>(buf.size())}, buf);
  pack_cca(ckpt, cca);

  std::filesystem::create_directories(cfg.checkpoint_dir);
  TrainResult res;
  res.path = std::filesystem::path(cfg.checkpoint_dir) /
             ("fold" + std::to_string(fold) + "_run" + std::to_string(run) + ".ckpt");
  checkpoint::save_checkpoint(res.path, ckpt);
  res.ckpt = std::move(ckpt);
  res.loss_history = std::move(loss_history);
  return res;
}

namespace {

struct LoadedModel {
  nnet::Branch audio = nnet::Branch::audio();
  nnet::Branch movement = nnet::Branch::movement();
  dcca::CcaModel cca;
  checkpoint::Checkpoint ckpt;
};

LoadedModel load_model(const std::filesystem::path& path) {
  LoadedModel m;
  m.ckpt = checkpoint::load_checkpoint(path);
  const double bn_eps =
      m.ckpt.meta.count("bn_eps") ? std::stod(m.ckpt.meta.at("bn_eps")) : 1e-5;
  const double bn_momentum =
      m.ckpt.meta.count("bn_momentum") ? std::stod(m.ckpt.meta.at("bn_momentum")) : 0.1;
  m.audio = nnet::Branch::audio(bn_eps, bn_momentum);
  m.movement = nnet::Branch::movement(bn_eps, bn_momentum);
  unpack_branch(m.ckpt, m.audio);
  unpack_branch(m.ckpt, m.movement);
  m.cca = unpack_cca(m.ckpt);
  return m;
}

retrieval::EmbeddingSet embed_clips(const RunConfig& cfg,
                                    const ingest::DatasetManifest& manifest,
                                    const std::vector<std::string>& ids,
                                    LoadedModel& model, dcca::View view) {
  retrieval::EmbeddingSet set;
  set.ids = ids;
  set.vecs.resize(static_cast<long>(ids.size()), model.cca.k);
  nnet::Tensor ta, tm;
  for (std::size_t c = 0; c < ids.size(); ++c) {
    SegmentStore one;
    one.clip_ids = {ids[c]};
    one.clips.push_back(load_clip_features(cfg, ids[c]));
    for (int s = 0; s < one.clips.back().audio_segments; ++s) one.index.emplace_back(0, s);
    std::vector<int> which(static_cast<std::size_t>(one.total()));
    for (int i = 0; i < one.total(); ++i) which[static_cast<std::size_t>(i)] = i;
    fill_batch(cfg, one, which, ta, tm);
    const MatrixXd out = view == dcca::View::x
                             ? model.audio.forward(ta, nnet::Mode::eval)
                             : model.movement.forward(tm, nnet::Mode::eval);
    set.vecs.row(static_cast<long>(c)) = clip_embedding(out, model.cca, view).transpose();
    set.styles.push_back(manifest.entry(ids[c]).style);
  }
  return set;
}

retrieval::DirectionMetrics average_metrics(
    const std::vector<retrieval::DirectionMetrics>& runs) {
  retrieval::DirectionMetrics avg = runs.front();
  const double n = static_cast<double>(runs.size());
  if (runs.size() == 1) return avg;
  avg.pair_accuracy = 0.0;
  avg.rank_accuracy = 0.0;
  avg.map_average = 0.0;
  avg.map_overall = 0.0;
  avg.perm_p_overall = 0.0;
  avg.pair_successes = 0;
  for (auto& [cls, v] : avg.map_per_class) v = 0.0;
  for (auto& [cls, v] : avg.perm_p_per_class) v = 0.0;
  for (const auto& r : runs) {
    avg.pair_accuracy += r.pair_accuracy / n;
    avg.rank_accuracy += r.rank_accuracy / n;
    avg.map_average += r.map_average / n;
    avg.map_overall += r.map_overall / n;
    avg.perm_p_overall += r.perm_p_overall / n;
    avg.pair_successes += r.pair_successes;
    for (const auto& [cls, v] : r.map_per_class) avg.map_per_class[cls] += v / n;
    for (const auto& [cls, v] : r.perm_p_per_class) avg.perm_p_per_class[cls] += v / n;
  }
  avg.pair_successes = avg.pair_successes / static_cast<std::int64_t>(runs.size());
  // binomial tests on the run-averaged scores, conservative trial count
  const auto pair_hits = static_cast<std::int64_t>(
      std::llround(avg.pair_accuracy * avg.significance_trials));
  const auto rank_hits = static_cast<std::int64_t>(
      std::llround(avg.rank_accuracy * avg.significance_trials));
  avg.pair_p = retrieval::binomial_pvalue(pair_hits, avg.significance_trials, 0.25);
  avg.rank_p = retrieval::binomial_pvalue(rank_hits, avg.significance_trials, 0.5);
  return avg;
}

}  // namespace

retrieval::RetrievalReport evaluate_fold(
    const RunConfig& cfg, int fold,
    const std::vector<std::filesystem::path>& checkpoints) {
  cfg.validate();
  if (checkpoints.empty()) throw ConfigError("evaluate needs at least one checkpoint");
  const ingest::DatasetManifest manifest = ingest::load_manifest(cfg.manifest);
  const ingest::FoldAssignment folds =
      ingest::stratified_folds(manifest, cfg.folds, cfg.fold_seed);
  if (fold < 0 || fold >= cfg.folds) throw ConfigError("fold index out of range");
  const std::vector<std::string> test_ids = folds.ids_in_fold(fold);
  if (test_ids.size() < 2) throw DataError("test fold has fewer than two clips");
  const std::set<std::string> test_set(test_ids.begin(), test_ids.end());

  retrieval::RetrievalReport report;
  report.config_hash = cfg.config_hash();
  report.fold = fold;
  report.runs = static_cast<int>(checkpoints.size());
  report.queries = static_cast<int>(test_ids.size());
  report.workers = resolved_workers(cfg);
  report.math_threads = 1;

  std::vector<retrieval::DirectionMetrics> a2m_runs, m2a_runs;
  for (const auto& path : checkpoints) {
    LoadedModel model = load_model(path);

    for (const auto& id : split(model.ckpt.meta.at("train_ids"), ','))
      if (test_set.count(id))
        throw ConfigError("fold leakage: checkpoint " + path.string() +
                          " was trained on test clip '" + id + "'");
    if (model.ckpt.meta.at("config_hash") != report.config_hash)
      log_warn("checkpoint " + path.string() + " was trained under a different config");

    report.seeds.push_back(std::stoull(model.ckpt.meta.at("seed")));
    report.target_frame = model.ckpt.meta.at("target_frame");
    report.audio_params = model.audio.total_param_count();
    report.movement_params = model.movement.total_param_count();

    retrieval::EmbeddingSet audio_set =
        embed_clips(cfg, manifest, test_ids, model, dcca::View::x);
    retrieval::EmbeddingSet movement_set =
        embed_clips(cfg, manifest, test_ids, model, dcca::View::y);

    retrieval::EvalOptions opts;
    opts.n_perm = cfg.n_perm;
    opts.mc_samples = cfg.mc_samples;
    opts.seed = cfg.seed;
    a2m_runs.push_back(retrieval::evaluate_direction("audio_to_movement", audio_set,
                                                     movement_set, opts));
    m2a_runs.push_back(retrieval::evaluate_direction("movement_to_audio", movement_set,
                                                     audio_set, opts));
  }

  std::vector<ingest::Style> candidate_styles;
  for (const auto& id : test_ids) candidate_styles.push_back(manifest.entry(id).style);
  report.baseline =
      retrieval::random_map_baseline(candidate_styles, cfg.mc_samples, cfg.seed);
  report.audio_to_movement = average_metrics(a2m_runs);
  report.movement_to_audio = average_metrics(m2a_runs);
  return report;
}

std::vector<RankedItem> retrieve(const RunConfig& cfg,
                                 const std::filesystem::path& checkpoint_path,
                                 const std::filesystem::path& query_path,
                                 Direction direction) {
  cfg.validate();
  const ingest::DatasetManifest manifest = ingest::load_manifest(cfg.manifest);
  if (manifest.entries.empty()) throw DataError("empty retrieval index");
  LoadedModel model = load_model(checkpoint_path);

  // query embedding
  Eigen::VectorXd query_vec;
  if (direction == Direction::audio_to_movement) {
    const ingest::AudioClip clip = ingest::load_audio_any_duration(query_path);
    const MatrixXd mel = audiofeat::mel_spectrogram(clip, cfg.mel_config());
    const auto segs =
        audiofeat::segment_features(mel, cfg.audio_seg_len, cfg.audio_seg_hop);
    nnet::Tensor t(static_cast<int>(segs.segments.size()), cfg.audio_seg_len,
                   cfg.n_mels, 1);
    for (std::size_t s = 0; s < segs.segments.size(); ++s)
      for (int r = 0; r < cfg.audio_seg_len; ++r)
        for (int c = 0; c < cfg.n_mels; ++c)
          t.at(static_cast<int>(s), r, c, 0) = segs.segments[s](r, c);
    query_vec =
        clip_embedding(model.audio.forward(t, nnet::Mode::eval), model.cca, dcca::View::x);
  } else {
    // pose query: the track's own declared frame count is accepted
    std::ifstream in(query_path);
    if (!in) throw DataError("cannot open query pose track: " + query_path.string());
    std::string header;
    std::getline(in, header);
    int fps = 0, w = 0, h = 0, frames = 0;
    if (std::sscanf(header.c_str(), "fps=%d width=%d height=%d frames=%d", &fps, &w, &h,
                    &frames) != 4)
      throw DataError("malformed pose header in query: " + query_path.string());
    const ingest::PoseTrack track = ingest::load_pose_track(query_path, frames);
    const posefeat::NormalizationParams params = normalization_params(
        cfg, manifest.entry(model.ckpt.meta.at("target_frame")));
    const MatrixXd feats =
        posefeat::derive_movement_features(posefeat::normalize_track(track, params));
    const auto segs =
        audiofeat::segment_features(feats, cfg.move_seg_len, cfg.move_seg_hop);
    nnet::Tensor t(static_cast<int>(segs.segments.size()), cfg.move_seg_len, 1,
                   posefeat::kMovementFeatures);
    for (std::size_t s = 0; s < segs.segments.size(); ++s)
      for (int r = 0; r < cfg.move_seg_len; ++r)
        for (int c = 0; c < posefeat::kMovementFeatures; ++c)
          t.at(static_cast<int>(s), r, 0, c) = segs.segments[s](r, c);
    query_vec = clip_embedding(model.movement.forward(t, nnet::Mode::eval), model.cca,
                               dcca::View::y);
  }

  // index: every opposite-modality object in the manifest
  std::vector<std::string> ids;
  for (const auto& e : manifest.entries) ids.push_back(e.clip_id);
  const dcca::View index_view = direction == Direction::audio_to_movement
                                    ? dcca::View::y
                                    : dcca::View::x;
  retrieval::EmbeddingSet index = embed_clips(cfg, manifest, ids, model, index_view);

  std::vector<RankedItem> ranked;
  ranked.reserve(ids.size());
  for (int i = 0; i < index.size(); ++i)
    ranked.push_back({0, index.ids[static_cast<std::size_t>(i)],
                      retrieval::cosine_similarity(query_vec, index.vecs.row(i).transpose())});
  std::sort(ranked.begin(), ranked.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.clip_id < b.clip_id;
  });
  for (std::size_t i = 0; i < ranked.size(); ++i)
    ranked[i].rank = static_cast<int>(i) + 1;
  return ranked;
}

}  // namespace musedance::pipeline
