// Command-line front end: extract features, train and evaluate the two-branch
// correlation model, run cross-modal retrieval, and synthesize datasets.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "musedance/common.hpp"
#include "musedance/config.hpp"
#include "musedance/ingest.hpp"
#include "musedance/nnet.hpp"
#include "musedance/pipeline.hpp"
#include "musedance/retrieval.hpp"
#include "musedance/synth.hpp"

namespace {

using musedance::config::RunConfig;

struct CommonFlags {
  std::string config_path;
  std::optional<std::string> manifest, cache_dir, checkpoint_dir, target_frame;
  std::optional<std::uint64_t> seed, fold_seed;
  std::optional<int> epochs, batch_size, cca_k, folds, workers, n_perm, mc_samples;
  std::optional<double> lr, r_reg, alpha, epsilon;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--manifest", f.manifest, "dataset manifest (tsv)");
  cmd->add_option("--cache-dir", f.cache_dir, "feature cache directory");
  cmd->add_option("--checkpoint-dir", f.checkpoint_dir, "checkpoint directory");
  cmd->add_option("--target-frame", f.target_frame, "pose normalization target clip id");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--fold-seed", f.fold_seed, "fold assignment seed");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch-size", f.batch_size, "DCCA batch size (segments)");
  cmd->add_option("--cca-k", f.cca_k, "CCA embedding components");
  cmd->add_option("--folds", f.folds, "cross-validation folds");
  cmd->add_option("--workers", f.workers, "extraction worker threads (0 = auto)");
  cmd->add_option("--n-perm", f.n_perm, "permutations for the MAP significance test");
  cmd->add_option("--mc-samples", f.mc_samples, "Monte Carlo samples for the MAP baseline");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--r-reg", f.r_reg, "covariance regularization weight");
  cmd->add_option("--alpha", f.alpha, "far-ankle tolerance factor");
  cmd->add_option("--epsilon", f.epsilon, "far-ankle tolerance (pixels)");
}

// precedence: flags > MUSEDANCE_CACHE_DIR > config file > defaults
RunConfig build_config(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) cfg = musedance::config::load_config(f.config_path);
  if (const char* env = std::getenv("MUSEDANCE_CACHE_DIR")) cfg.cache_dir = env;
  if (f.manifest) cfg.manifest = *f.manifest;
  if (f.cache_dir) cfg.cache_dir = *f.cache_dir;
  if (f.checkpoint_dir) cfg.checkpoint_dir = *f.checkpoint_dir;
  if (f.target_frame) cfg.target_frame = *f.target_frame;
  if (f.seed) cfg.seed = *f.seed;
  if (f.fold_seed) cfg.fold_seed = *f.fold_seed;
  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.batch_size) cfg.batch_size = *f.batch_size;
  if (f.cca_k) cfg.cca_k = *f.cca_k;
  if (f.folds) cfg.folds = *f.folds;
  if (f.workers) cfg.workers = *f.workers;
  if (f.n_perm) cfg.n_perm = *f.n_perm;
  if (f.mc_samples) cfg.mc_samples = *f.mc_samples;
  if (f.lr) cfg.lr = *f.lr;
  if (f.r_reg) cfg.r_reg = *f.r_reg;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (f.epsilon) cfg.epsilon = *f.epsilon;
  cfg.validate();
  return cfg;
}

void print_reproducibility(const RunConfig& cfg, const std::string& target,
                           std::uint64_t seed) {
  auto audio = musedance::nnet::Branch::audio();
  auto movement = musedance::nnet::Branch::movement();
  std::cout << "# reproducibility\n"
            << "config_hash " << cfg.config_hash() << "\n"
            << "seed " << seed << "\n"
            << "fold_seed " << cfg.fold_seed << "\n"
            << "target_frame " << target << "\n"
            << "audio_params " << audio.total_param_count() << "\n"
            << "movement_params " << movement.total_param_count() << "\n"
            << "math_threads 1\n";
}

int cmd_extract(const RunConfig& cfg) {
  const auto res = musedance::pipeline::extract_all(cfg);
  std::cout << "extracted " << res.written << " clips, skipped " << res.skipped
            << " up-to-date\n";
  if (!res.failures.empty()) {
    for (const auto& [id, why] : res.failures)
      std::cerr << "[fail] " << id << ": " << why << "\n";
    return 1;
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, int fold, int runs) {
  for (int run = 0; run < runs; ++run) {
    const auto res = musedance::pipeline::train_fold(cfg, fold, run);
    print_reproducibility(cfg, res.ckpt.meta.at("target_frame"),
                          musedance::pipeline::run_seed(cfg, run));
    std::cout << "checkpoint " << res.path.string() << "\n";
    if (!res.loss_history.empty())
      std::cout << "final_loss " << res.loss_history.back() << "\n";
  }
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, int fold,
                 const std::vector<std::string>& checkpoints,
                 const std::string& report_path) {
  std::vector<std::filesystem::path> paths;
  if (checkpoints.empty()) {
    // default: every checkpoint of this fold in the checkpoint directory
    const std::string prefix = "fold" + std::to_string(fold) + "_run";
    if (std::filesystem::is_directory(cfg.checkpoint_dir))
      for (const auto& e : std::filesystem::directory_iterator(cfg.checkpoint_dir))
        if (e.path().filename().string().rfind(prefix, 0) == 0 &&
            e.path().extension() == ".ckpt")
          paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());
  } else {
    for (const auto& c : checkpoints) paths.emplace_back(c);
  }
  if (paths.empty())
    throw musedance::DataError("no checkpoints found for fold " + std::to_string(fold));

  const auto report = musedance::pipeline::evaluate_fold(cfg, fold, paths);
  print_reproducibility(cfg, report.target_frame,
                        report.seeds.empty() ? cfg.seed : report.seeds.front());
  const std::string text = musedance::retrieval::serialize_report(report);
  if (report_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) throw musedance::DataError("cannot write report to " + report_path);
    out << text;
    std::cout << "report " << report_path << "\n";
  }
  return 0;
}

int cmd_retrieve(const RunConfig& cfg, const std::string& checkpoint,
                 const std::string& query, const std::string& direction, int top) {
  musedance::pipeline::Direction dir;
  if (direction == "audio-to-movement")
    dir = musedance::pipeline::Direction::audio_to_movement;
  else if (direction == "movement-to-audio")
    dir = musedance::pipeline::Direction::movement_to_audio;
  else
    throw musedance::ConfigError("direction must be 'audio-to-movement' or 'movement-to-audio'");

  const auto ranked = musedance::pipeline::retrieve(cfg, checkpoint, query, dir);
  const int n = top > 0 ? std::min<int>(top, static_cast<int>(ranked.size()))
                        : static_cast<int>(ranked.size());
  for (int i = 0; i < n; ++i)
    std::printf("%d\t%s\t%.6f\n", ranked[static_cast<std::size_t>(i)].rank,
                ranked[static_cast<std::size_t>(i)].clip_id.c_str(),
                ranked[static_cast<std::size_t>(i)].score);
  return 0;
}

int cmd_synth(const musedance::synth::SynthConfig& scfg, const std::string& out_dir) {
  const auto manifest = musedance::synth::generate_dataset(scfg, out_dir);
  std::cout << "manifest " << (std::filesystem::path(out_dir) / "manifest.tsv").string()
            << "\n"
            << "objects " << manifest.entries.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-modal music <-> dance retrieval pipeline"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* extract = app.add_subcommand("extract", "compute and cache features");
  add_common_flags(extract, flags);

  auto* train = app.add_subcommand("train", "train branches and fit the linear CCA");
  add_common_flags(train, flags);
  int fold = 0, runs = 1;
  train->add_option("--fold", fold, "test fold to hold out")->required();
  train->add_option("--runs", runs, "number of re-seeded runs to train");

  auto* evaluate = app.add_subcommand("evaluate", "score a test fold");
  add_common_flags(evaluate, flags);
  int eval_fold = 0;
  std::vector<std::string> eval_ckpts;
  std::string report_path;
  evaluate->add_option("--fold", eval_fold, "test fold")->required();
  evaluate->add_option("--checkpoint", eval_ckpts, "checkpoint file(s); default: all runs of the fold");
  evaluate->add_option("--report", report_path, "write the report here instead of stdout");

  auto* retrieve = app.add_subcommand("retrieve", "rank cross-modal matches for one query");
  add_common_flags(retrieve, flags);
  std::string query_path, ckpt_path, direction = "audio-to-movement";
  int top = 0;
  retrieve->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
  retrieve->add_option("--query", query_path, "query WAV or pose track")->required();
  retrieve->add_option("--direction", direction, "audio-to-movement | movement-to-audio");
  retrieve->add_option("--top", top, "print only the best N results");

  auto* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
  musedance::synth::SynthConfig scfg;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--objects", scfg.n_objects, "number of audio/pose pairs");
  synth->add_option("--latent-dim", scfg.latent_dim, "shared latent dimensions");
  synth->add_option("--noise", scfg.noise_sigma, "pose jitter std (pixels)");
  synth->add_option("--styles", scfg.styles, "number of synthetic classes");
  synth->add_option("--seed", scfg.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (extract->parsed()) return cmd_extract(build_config(flags));
    if (train->parsed()) return cmd_train(build_config(flags), fold, runs);
    if (evaluate->parsed())
      return cmd_evaluate(build_config(flags), eval_fold, eval_ckpts, report_path);
    if (retrieve->parsed())
      return cmd_retrieve(build_config(flags), ckpt_path, query_path, direction, top);
    if (synth->parsed()) return cmd_synth(scfg, synth_out);
  } catch (const musedance::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
