#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "musedance/ingest.hpp"

namespace musedance::retrieval {

enum class Modality { audio, movement };

// Aligned object embeddings for one modality: row i of vecs pairs with row i
// of the opposite-modality set.
struct EmbeddingSet {
  std::vector<std::string> ids;
  std::vector<ingest::Style> styles;
  Eigen::MatrixXd vecs;  // n x k

  int size() const { return static_cast<int>(vecs.rows()); }
  void validate() const;
};

// Mean of a clip's segment projections (rows).
Eigen::VectorXd object_embedding(const Eigen::MatrixXd& segment_projections);

// a.b / (|a||b|); similarity 0 (with a warning) when either vector is zero.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Full query-candidate cosine matrix, queries in rows.
Eigen::MatrixXd similarity_matrix(const EmbeddingSet& queries,
                                  const EmbeddingSet& candidates);

struct PairAccuracy {
  double score = 0.0;
  std::int64_t successes = 0;
  std::int64_t trials = 0;  // n * (n - 1)
};

// Trial (i, j != i) succeeds iff sim(x_i,y_i) > sim(x_i,y_j) and
// sim(x_j,y_j) > sim(x_j,y_i); ties fail. Chance level 0.25.
PairAccuracy pair_accuracy(const EmbeddingSet& queries, const EmbeddingSet& candidates);

// 1-based rank of each query's true pair, ties broken by candidate id.
std::vector<int> rank_positions(const EmbeddingSet& queries,
                                const EmbeddingSet& candidates);

// Mean over queries of 1 - (r-1)/(L-1). Chance level 0.5.
double rank_accuracy(const EmbeddingSet& queries, const EmbeddingSet& candidates);

struct ClassMapResult {
  std::map<ingest::Style, double> per_class;
  double average = 0.0;  // unweighted mean over classes
  double overall = 0.0;  // query-weighted mean
  std::vector<double> ap_per_query;
};

// AP over the full ranked candidate list, relevance = shared style.
ClassMapResult class_map(const EmbeddingSet& queries, const EmbeddingSet& candidates);

// Exact one-sided upper tail P[Bin(trials, p0) >= successes], summed in log
// space.
double binomial_pvalue(std::int64_t successes, std::int64_t trials, double p0);

struct MapBaseline {
  std::map<ingest::Style, double> expected;
  std::map<ingest::Style, double> std_error;  // 0 for the exact small-n path
  double overall = 0.0;
};

// Expected AP per class under a uniformly random ranking. Candidate lists of
// at most 8 items are enumerated exactly; larger lists use seeded Monte Carlo
// with the standard error reported.
MapBaseline random_map_baseline(const std::vector<ingest::Style>& candidate_styles,
                                int mc_samples, std::uint64_t seed);

struct PermutationResult {
  std::map<ingest::Style, double> p_per_class;
  double p_overall = 1.0;
};

// p = (1 + #{permuted MAP >= observed}) / (1 + n_perm); style labels are
// permuted jointly across both modalities.
PermutationResult permutation_test_map(const EmbeddingSet& queries,
                                       const EmbeddingSet& candidates, int n_perm,
                                       std::uint64_t seed);

struct DirectionMetrics {
  std::string direction;
  double pair_accuracy = 0.0;
  std::int64_t pair_successes = 0;
  std::int64_t pair_trials = 0;
  int significance_trials = 0;  // conservative: query count
  double pair_p = 1.0;
  double rank_accuracy = 0.0;
  double rank_p = 1.0;
  double map_average = 0.0;
  double map_overall = 0.0;
  std::map<ingest::Style, double> map_per_class;
  std::map<ingest::Style, double> perm_p_per_class;
  double perm_p_overall = 1.0;
};

struct EvalOptions {
  int n_perm = 1000;
  int mc_samples = 100000;
  std::uint64_t seed = 0;
};

// All metrics for one query direction.
DirectionMetrics evaluate_direction(const std::string& name, const EmbeddingSet& queries,
                                    const EmbeddingSet& candidates,
                                    const EvalOptions& opts);

struct RetrievalReport {
  int schema_version = 1;
  std::string config_hash;
  int fold = 0;
  int runs = 1;
  std::vector<std::uint64_t> seeds;
  int queries = 0;
  std::int64_t audio_params = 0;
  std::int64_t movement_params = 0;
  std::string target_frame;
  int workers = 1;
  int math_threads = 1;
  MapBaseline baseline;
  DirectionMetrics audio_to_movement;
  DirectionMetrics movement_to_audio;
};

// Schema-versioned key-value text with per-class tables; parse() inverts
// serialize() exactly.
std::string serialize_report(const RetrievalReport& report);
RetrievalReport parse_report(const std::string& text);

}  // namespace musedance::retrieval
