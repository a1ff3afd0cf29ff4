#include "musedance/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "musedance/common.hpp"

namespace musedance::retrieval {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ingest::Style;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// AP of one ranked relevance mask.
double average_precision(const std::vector<char>& rel_in_rank_order, int n_relevant) {
  if (n_relevant <= 0) throw DataError("class has no relevant candidates");
  double ap = 0.0;
  int hits = 0;
  for (std::size_t j = 0; j < rel_in_rank_order.size(); ++j) {
    if (rel_in_rank_order[j]) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(j + 1);
    }
  }
  return ap / n_relevant;
}

std::vector<int> ranked_candidate_order(const EmbeddingSet& candidates,
                                        const VectorXd& scores) {
  std::vector<int> order(static_cast<std::size_t>(candidates.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates.ids[static_cast<std::size_t>(a)] <
           candidates.ids[static_cast<std::size_t>(b)];
  });
  return order;
}

}  // namespace

void EmbeddingSet::validate() const {
  if (static_cast<int>(ids.size()) != size() || static_cast<int>(styles.size()) != size())
    throw ConfigError("embedding set ids/styles/vectors disagree in length");
  if (!vecs.allFinite()) throw NumericError("embedding set contains non-finite values");
}

VectorXd object_embedding(const MatrixXd& segment_projections) {
  if (segment_projections.rows() < 1)
    throw DataError("object embedding needs at least one segment");
  return segment_projections.colwise().mean().transpose();
}

double cosine_similarity(const VectorXd& a, const VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    log_warn("cosine similarity of a zero vector, returning 0");
    return 0.0;
  }
  return a.dot(b) / (na * nb);
}

MatrixXd similarity_matrix(const EmbeddingSet& queries, const EmbeddingSet& candidates) {
  queries.validate();
  candidates.validate();
  MatrixXd s(queries.size(), candidates.size());
  for (int i = 0; i < queries.size(); ++i)
    for (int j = 0; j < candidates.size(); ++j)
      s(i, j) = cosine_similarity(queries.vecs.row(i).transpose(),
                                  candidates.vecs.row(j).transpose());
  return s;
}

PairAccuracy pair_accuracy(const EmbeddingSet& queries, const EmbeddingSet& candidates) {
  const int n = queries.size();
  if (n != candidates.size()) throw ConfigError("pair accuracy requires paired sets");
  if (n < 2) throw ConfigError("pair accuracy needs at least two objects");
  const MatrixXd s = similarity_matrix(queries, candidates);
  PairAccuracy pa;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      ++pa.trials;
      if (s(i, i) > s(i, j) && s(j, j) > s(j, i)) ++pa.successes;
    }
  }
  pa.score = static_cast<double>(pa.successes) / static_cast<double>(pa.trials);
  return pa;
}

std::vector<int> rank_positions(const EmbeddingSet& queries, const EmbeddingSet& candidates) {
  const int n = queries.size();
  if (n != candidates.size()) throw ConfigError("rank positions require paired sets");
  const MatrixXd s = similarity_matrix(queries, candidates);
  std::vector<int> ranks(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    int r = 1;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (s(i, j) > s(i, i) ||
          (s(i, j) == s(i, i) && candidates.ids[static_cast<std::size_t>(j)] <
                                     candidates.ids[static_cast<std::size_t>(i)]))
        ++r;
    }
    ranks[static_cast<std::size_t>(i)] = r;
  }
  return ranks;
}

double rank_accuracy(const EmbeddingSet& queries, const EmbeddingSet& candidates) {
  const int n = queries.size();
  if (n < 2) throw ConfigError("rank accuracy needs at least two objects");
  const auto ranks = rank_positions(queries, candidates);
  double acc = 0.0;
  for (int r : ranks)
    acc += 1.0 - static_cast<double>(r - 1) / static_cast<double>(n - 1);
  return acc / n;
}

ClassMapResult class_map(const EmbeddingSet& queries, const EmbeddingSet& candidates) {
  queries.validate();
  candidates.validate();
  const MatrixXd s = similarity_matrix(queries, candidates);

  std::map<Style, int> relevant_count;
  for (Style st : candidates.styles) ++relevant_count[st];

  ClassMapResult res;
  std::map<Style, std::vector<double>> ap_by_class;
  for (int i = 0; i < queries.size(); ++i) {
    const Style cls = queries.styles[static_cast<std::size_t>(i)];
    auto it = relevant_count.find(cls);
    if (it == relevant_count.end() || it->second == 0)
      throw DataError("query class '" + ingest::style_name(cls) +
                      "' has no relevant candidates");
    const auto order = ranked_candidate_order(candidates, s.row(i).transpose());
    std::vector<char> rel(order.size(), 0);
    for (std::size_t j = 0; j < order.size(); ++j)
      rel[j] = candidates.styles[static_cast<std::size_t>(order[j])] == cls ? 1 : 0;
    const double ap = average_precision(rel, it->second);
    ap_by_class[cls].push_back(ap);
    res.ap_per_query.push_back(ap);
  }

  double total = 0.0;
  for (const auto& [cls, aps] : ap_by_class) {
    const double m = std::accumulate(aps.begin(), aps.end(), 0.0) / aps.size();
    res.per_class[cls] = m;
    total += m;
  }
  res.average = total / static_cast<double>(ap_by_class.size());
  res.overall = std::accumulate(res.ap_per_query.begin(), res.ap_per_query.end(), 0.0) /
                static_cast<double>(res.ap_per_query.size());
  return res;
}

double binomial_pvalue(std::int64_t successes, std::int64_t trials, double p0) {
  if (trials < 1) throw ConfigError("binomial test needs at least one trial");
  if (successes < 0 || successes > trials)
    throw ConfigError("successes outside [0, trials]");
  if (p0 <= 0.0 || p0 >= 1.0) throw ConfigError("p0 must lie strictly in (0, 1)");
  if (successes <= 0) return 1.0;

  const double lp = std::log(p0), lq = std::log1p(-p0);
  const double lgn = std::lgamma(static_cast<double>(trials) + 1.0);
  std::vector<double> logterms;
  logterms.reserve(static_cast<std::size_t>(trials - successes + 1));
  for (std::int64_t k = successes; k <= trials; ++k) {
    const double lt = lgn - std::lgamma(static_cast<double>(k) + 1.0) -
                      std::lgamma(static_cast<double>(trials - k) + 1.0) +
                      static_cast<double>(k) * lp + static_cast<double>(trials - k) * lq;
    logterms.push_back(lt);
  }
  const double lmax = *std::max_element(logterms.begin(), logterms.end());
  double sum = 0.0;
  for (double lt : logterms) sum += std::exp(lt - lmax);
  return std::min(1.0, std::exp(lmax + std::log(sum)));
}

MapBaseline random_map_baseline(const std::vector<Style>& candidate_styles,
                                int mc_samples, std::uint64_t seed) {
  if (candidate_styles.empty()) throw ConfigError("baseline needs candidate labels");
  const int n = static_cast<int>(candidate_styles.size());
  std::map<Style, int> counts;
  for (Style st : candidate_styles) ++counts[st];

  MapBaseline base;
  for (const auto& [cls, r] : counts) {
    if (n <= 8) {
      // exact: enumerate every placement of the r relevant items
      std::vector<char> mask(static_cast<std::size_t>(n), 0);
      std::fill(mask.begin(), mask.begin() + r, 1);
      std::sort(mask.begin(), mask.end());
      double total = 0.0;
      long arrangements = 0;
      do {
        total += average_precision(mask, r);
        ++arrangements;
      } while (std::next_permutation(mask.begin(), mask.end()));
      base.expected[cls] = total / static_cast<double>(arrangements);
      base.std_error[cls] = 0.0;
    } else {
      if (mc_samples < 1000) throw ConfigError("Monte Carlo baseline needs >= 1000 samples");
      Rng rng(seed ^ fnv1a64(ingest::style_name(cls)));
      std::vector<char> mask(static_cast<std::size_t>(n), 0);
      for (int i = 0; i < r; ++i) mask[static_cast<std::size_t>(i)] = 1;
      double total = 0.0, total_sq = 0.0;
      for (int s = 0; s < mc_samples; ++s) {
        rng.shuffle(mask);
        const double ap = average_precision(mask, r);
        total += ap;
        total_sq += ap * ap;
      }
      const double mean = total / mc_samples;
      const double var = std::max(0.0, total_sq / mc_samples - mean * mean);
      base.expected[cls] = mean;
      base.std_error[cls] = std::sqrt(var / mc_samples);
    }
  }

  double weighted = 0.0;
  for (const auto& [cls, r] : counts) weighted += base.expected[cls] * r;
  base.overall = weighted / n;
  return base;
}

PermutationResult permutation_test_map(const EmbeddingSet& queries,
                                       const EmbeddingSet& candidates, int n_perm,
                                       std::uint64_t seed) {
  if (n_perm < 1) throw ConfigError("permutation test needs at least one permutation");
  const ClassMapResult observed = class_map(queries, candidates);

  Rng rng(seed);
  std::map<Style, int> ge_class;
  for (const auto& [cls, v] : observed.per_class) ge_class[cls] = 0;
  int ge_overall = 0;

  EmbeddingSet pq = queries;
  EmbeddingSet pc = candidates;
  std::vector<std::size_t> perm(queries.styles.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (int p = 0; p < n_perm; ++p) {
    rng.shuffle(perm);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      pq.styles[i] = queries.styles[perm[i]];
      pc.styles[i] = candidates.styles[perm[i]];
    }
    const ClassMapResult shuffled = class_map(pq, pc);
    for (const auto& [cls, v] : shuffled.per_class)
      if (observed.per_class.count(cls) && v >= observed.per_class.at(cls))
        ++ge_class[cls];
    if (shuffled.overall >= observed.overall) ++ge_overall;
  }

  PermutationResult res;
  for (const auto& [cls, ge] : ge_class)
    res.p_per_class[cls] = (1.0 + ge) / (1.0 + n_perm);
  res.p_overall = (1.0 + ge_overall) / (1.0 + n_perm);
  return res;
}

DirectionMetrics evaluate_direction(const std::string& name, const EmbeddingSet& queries,
                                    const EmbeddingSet& candidates,
                                    const EvalOptions& opts) {
  DirectionMetrics m;
  m.direction = name;
  const PairAccuracy pa = pair_accuracy(queries, candidates);
  m.pair_accuracy = pa.score;
  m.pair_successes = pa.successes;
  m.pair_trials = pa.trials;
  m.rank_accuracy = rank_accuracy(queries, candidates);

  // conservative binomial trials: one per independent query
  m.significance_trials = queries.size();
  const auto pair_hits =
      static_cast<std::int64_t>(std::llround(m.pair_accuracy * m.significance_trials));
  const auto rank_hits =
      static_cast<std::int64_t>(std::llround(m.rank_accuracy * m.significance_trials));
  m.pair_p = binomial_pvalue(pair_hits, m.significance_trials, 0.25);
  m.rank_p = binomial_pvalue(rank_hits, m.significance_trials, 0.5);

  const ClassMapResult cm = class_map(queries, candidates);
  m.map_average = cm.average;
  m.map_overall = cm.overall;
  m.map_per_class = cm.per_class;

  const PermutationResult pr =
      permutation_test_map(queries, candidates, opts.n_perm, opts.seed);
  m.perm_p_per_class = pr.p_per_class;
  m.perm_p_overall = pr.p_overall;
  return m;
}

// ---------------------------------------------------------------------------
// Report serialization

namespace {

void serialize_direction(std::ostringstream& out, const DirectionMetrics& m) {
  out << "direction " << m.direction << "\n";
  out << "pair_accuracy " << fmt_double(m.pair_accuracy) << " successes "
      << m.pair_successes << " trials " << m.pair_trials << "\n";
  out << "pair_p " << fmt_double(m.pair_p) << " significance_trials "
      << m.significance_trials << "\n";
  out << "rank_accuracy " << fmt_double(m.rank_accuracy) << "\n";
  out << "rank_p " << fmt_double(m.rank_p) << "\n";
  out << "map_average " << fmt_double(m.map_average) << " map_overall "
      << fmt_double(m.map_overall) << " perm_p_overall " << fmt_double(m.perm_p_overall)
      << "\n";
  for (const auto& [cls, v] : m.map_per_class)
    out << "class_map " << ingest::style_name(cls) << " " << fmt_double(v) << " perm_p "
        << fmt_double(m.perm_p_per_class.at(cls)) << "\n";
}

}  // namespace

std::string serialize_report(const RetrievalReport& r) {
  std::ostringstream out;
  out << "musedance-report " << r.schema_version << "\n";
  out << "config_hash " << r.config_hash << "\n";
  out << "fold " << r.fold << "\n";
  out << "runs " << r.runs << "\n";
  out << "seeds";
  for (auto s : r.seeds) out << " " << s;
  out << "\n";
  out << "queries " << r.queries << "\n";
  out << "workers " << r.workers << "\n";
  out << "math_threads " << r.math_threads << "\n";
  out << "audio_params " << r.audio_params << "\n";
  out << "movement_params " << r.movement_params << "\n";
  out << "target_frame " << r.target_frame << "\n";
  out << "baseline_overall " << fmt_double(r.baseline.overall) << "\n";
  for (const auto& [cls, v] : r.baseline.expected)
    out << "class_baseline " << ingest::style_name(cls) << " " << fmt_double(v) << " se "
        << fmt_double(r.baseline.std_error.at(cls)) << "\n";
  serialize_direction(out, r.audio_to_movement);
  serialize_direction(out, r.movement_to_audio);
  out << "end\n";
  return out.str();
}

namespace {

Style parse_style_or_throw(const std::string& s) {
  auto st = ingest::parse_style(s);
  if (!st) throw DataError("unknown style in report: " + s);
  return *st;
}

}  // namespace

RetrievalReport parse_report(const std::string& text) {
  std::istringstream in(text);
  RetrievalReport r;
  std::string line;
  DirectionMetrics* cur = nullptr;
  bool saw_header = false, saw_end = false;

  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "musedance-report") {
      ls >> r.schema_version;
      if (r.schema_version != 1)
        throw DataError("unsupported report schema " + std::to_string(r.schema_version));
      saw_header = true;
    } else if (key == "config_hash") {
      ls >> r.config_hash;
    } else if (key == "fold") {
      ls >> r.fold;
    } else if (key == "runs") {
      ls >> r.runs;
    } else if (key == "seeds") {
      std::uint64_t s;
      while (ls >> s) r.seeds.push_back(s);
    } else if (key == "queries") {
      ls >> r.queries;
    } else if (key == "workers") {
      ls >> r.workers;
    } else if (key == "math_threads") {
      ls >> r.math_threads;
    } else if (key == "audio_params") {
      ls >> r.audio_params;
    } else if (key == "movement_params") {
      ls >> r.movement_params;
    } else if (key == "target_frame") {
      ls >> r.target_frame;
    } else if (key == "baseline_overall") {
      ls >> r.baseline.overall;
    } else if (key == "class_baseline") {
      std::string cls, se_kw;
      double v, se;
      ls >> cls >> v >> se_kw >> se;
      r.baseline.expected[parse_style_or_throw(cls)] = v;
      r.baseline.std_error[parse_style_or_throw(cls)] = se;
    } else if (key == "direction") {
      std::string name;
      ls >> name;
      cur = name == "audio_to_movement" ? &r.audio_to_movement : &r.movement_to_audio;
      cur->direction = name;
    } else if (key == "pair_accuracy" && cur) {
      std::string kw1, kw2;
      ls >> cur->pair_accuracy >> kw1 >> cur->pair_successes >> kw2 >> cur->pair_trials;
    } else if (key == "pair_p" && cur) {
      std::string kw;
      ls >> cur->pair_p >> kw >> cur->significance_trials;
    } else if (key == "rank_accuracy" && cur) {
      ls >> cur->rank_accuracy;
    } else if (key == "rank_p" && cur) {
      ls >> cur->rank_p;
    } else if (key == "map_average" && cur) {
      std::string kw1, kw2;
      ls >> cur->map_average >> kw1 >> cur->map_overall >> kw2 >> cur->perm_p_overall;
    } else if (key == "class_map" && cur) {
      std::string cls, kw;
      double v, p;
      ls >> cls >> v >> kw >> p;
      cur->map_per_class[parse_style_or_throw(cls)] = v;
      cur->perm_p_per_class[parse_style_or_throw(cls)] = p;
    } else if (key == "end") {
      saw_end = true;
    }
  }
  if (!saw_header || !saw_end) throw DataError("malformed report text");
  return r;
}

}  // namespace musedance::retrieval
