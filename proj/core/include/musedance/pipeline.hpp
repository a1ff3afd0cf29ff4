#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "musedance/checkpoint.hpp"
#include "musedance/config.hpp"
#include "musedance/ingest.hpp"
#include "musedance/retrieval.hpp"

namespace musedance::pipeline {

struct ExtractResult {
  int written = 0;
  int skipped = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // clip id, reason
};

// Computes and caches log-mel and movement segment stacks for every clip in
// the manifest. Idempotent: entries whose source content hash and feature
// parameters are unchanged are skipped. Per-clip failures are collected, not
// fatal.
ExtractResult extract_all(const config::RunConfig& cfg);

// The shared normalization target: the configured clip id, or the
// lexicographically first clip outside fold 0.
std::string resolve_target_frame(const config::RunConfig& cfg,
                                 const ingest::DatasetManifest& manifest,
                                 const ingest::FoldAssignment& folds);

std::filesystem::path audio_cache_path(const config::RunConfig& cfg,
                                       const std::string& clip_id);
std::filesystem::path movement_cache_path(const config::RunConfig& cfg,
                                          const std::string& clip_id);

struct TrainResult {
  checkpoint::Checkpoint ckpt;
  std::filesystem::path path;
  std::vector<double> loss_history;  // mean DCCA loss per epoch
};

// Trains both branches on the folds other than `fold` under the DCCA loss,
// fits the linear CCA on a final train-set forward pass and writes the
// checkpoint. Deterministic for a fixed config, fold and run.
TrainResult train_fold(const config::RunConfig& cfg, int fold, int run);

std::uint64_t run_seed(const config::RunConfig& cfg, int run);

// Evaluates checkpoints on the test fold (both query directions), averaging
// metrics over checkpoints. Aborts if any checkpoint was trained on a clip of
// the test fold.
retrieval::RetrievalReport evaluate_fold(
    const config::RunConfig& cfg, int fold,
    const std::vector<std::filesystem::path>& checkpoints);

enum class Direction { audio_to_movement, movement_to_audio };

struct RankedItem {
  int rank = 0;
  std::string clip_id;
  double score = 0.0;
};

// Embeds one query file (audio for audio_to_movement, pose track otherwise)
// and ranks every opposite-modality object of the manifest by cosine
// similarity. Requires extracted caches.
std::vector<RankedItem> retrieve(const config::RunConfig& cfg,
                                 const std::filesystem::path& checkpoint_path,
                                 const std::filesystem::path& query_path,
                                 Direction direction);

}  // namespace musedance::pipeline
