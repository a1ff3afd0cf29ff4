#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "musedance/common.hpp"
#include "musedance/retrieval.hpp"

using namespace musedance;
using namespace musedance::retrieval;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using ingest::Style;

namespace {

EmbeddingSet make_set(const MatrixXd& vecs, const std::vector<Style>& styles) {
  EmbeddingSet s;
  s.vecs = vecs;
  s.styles = styles;
  for (int i = 0; i < vecs.rows(); ++i)
    s.ids.push_back("clip_" + std::to_string(1000 + i));
  return s;
}

EmbeddingSet random_set(int n, int k, std::uint64_t seed,
                        int styles = 1) {
  Rng rng(seed);
  MatrixXd m(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) m(i, j) = rng.normal();
  std::vector<Style> st;
  for (int i = 0; i < n; ++i) st.push_back(static_cast<Style>(i % styles));
  return make_set(m, st);
}

// brute-force AP, written against the formula directly
double oracle_ap(const std::vector<int>& ranked_relevance, int n_relevant) {
  double ap = 0.0;
  int hits = 0;
  for (std::size_t j = 0; j < ranked_relevance.size(); ++j) {
    if (ranked_relevance[j]) ++hits;
    if (ranked_relevance[j])
      ap += static_cast<double>(hits) / static_cast<double>(j + 1);
  }
  return ap / n_relevant;
}

}  // namespace

TEST_CASE("object embedding: constant, antipodal, and random-mean cases") {
  MatrixXd same(19, 4);
  VectorXd v(4);
  v << 1.0, -2.0, 0.5, 3.0;
  for (int r = 0; r < 19; ++r) same.row(r) = v.transpose();
  CHECK((object_embedding(same) - v).cwiseAbs().maxCoeff() == 0.0);

  MatrixXd anti(2, 4);
  anti.row(0) = v.transpose();
  anti.row(1) = -v.transpose();
  CHECK(object_embedding(anti).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(5);
  MatrixXd rnd(19, 4);
  for (int i = 0; i < 19; ++i)
    for (int j = 0; j < 4; ++j) rnd(i, j) = rng.normal();
  VectorXd mean = VectorXd::Zero(4);
  for (int i = 0; i < 19; ++i) mean += rnd.row(i).transpose();
  mean /= 19.0;
  CHECK((object_embedding(rnd) - mean).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("cosine similarity: axis cases and the (1,2,3).(4,5,6) value") {
  VectorXd ex(2), ey(2);
  ex << 1, 0;
  ey << 0, 1;
  CHECK(cosine_similarity(ex, ex) == doctest::Approx(1.0));
  CHECK(cosine_similarity(ex, ey) == doctest::Approx(0.0));
  VectorXd a(3), b(3);
  a << 1, 2, 3;
  b << 4, 5, 6;
  CHECK(cosine_similarity(a, b) == doctest::Approx(32.0 / std::sqrt(14.0 * 77.0)).epsilon(1e-12));
  CHECK(cosine_similarity(VectorXd::Zero(3), b) == 0.0);
}

TEST_CASE("pair accuracy: orthogonal identical pairs score 1") {
  const MatrixXd eye = MatrixXd::Identity(5, 5);
  const auto x = make_set(eye, std::vector<Style>(5, Style::ballet));
  const auto pa = pair_accuracy(x, x);
  CHECK(pa.score == 1.0);
  CHECK(pa.trials == 20);  // n(n-1)
  CHECK(pa.successes == 20);
}

TEST_CASE("pair accuracy: all-identical embeddings fail every strict trial") {
  MatrixXd flat(4, 3);
  for (int i = 0; i < 4; ++i) flat.row(i) << 1.0, 2.0, 3.0;
  const auto x = make_set(flat, std::vector<Style>(4, Style::ballet));
  const auto pa = pair_accuracy(x, x);
  CHECK(pa.score == 0.0);
  CHECK(pa.trials == 12);
}

TEST_CASE("pair accuracy: matches the exhaustive oracle on random sets") {
  const auto x = random_set(4, 6, 11);
  const auto y = random_set(4, 6, 13);
  const auto pa = pair_accuracy(x, y);

  const MatrixXd s = similarity_matrix(x, y);
  std::int64_t hits = 0, trials = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (i == j) continue;
      ++trials;
      if (s(i, i) > s(i, j) && s(j, j) > s(j, i)) ++hits;
    }
  CHECK(pa.trials == trials);
  CHECK(pa.successes == hits);
  CHECK(pa.score == doctest::Approx(static_cast<double>(hits) / trials).epsilon(1e-12));
}

TEST_CASE("rank accuracy: perfect and worst-case rankings") {
  const MatrixXd eye = MatrixXd::Identity(4, 4);
  const auto x = make_set(eye, std::vector<Style>(4, Style::ballet));
  CHECK(rank_accuracy(x, x) == 1.0);

  // candidate i is the query's worst match: y_i points away from x_i,
  // every other candidate is orthogonal (cosine 0 > -1)
  const auto y = make_set(-eye, std::vector<Style>(4, Style::ballet));
  CHECK(rank_accuracy(x, y) == 0.0);
}

TEST_CASE("rank accuracy: rank 2 of 145 follows the formula") {
  const int n = 145;
  MatrixXd qx = MatrixXd::Zero(n, n + 1);
  MatrixXd cy = MatrixXd::Zero(n, n + 1);
  for (int i = 0; i < n; ++i) {
    qx(i, i) = 1.0;
    cy(i, i) = 1.0;
  }
  // query 0's true pair is beaten by exactly one candidate
  cy.row(0).setZero();
  cy(0, 0) = 0.9;  // cos(x_0, y_0) = 0.9
  cy(0, n) = std::sqrt(1.0 - 0.81);
  cy.row(5).setZero();
  cy(5, 0) = 0.99;  // cos(x_0, y_5) = 0.99 outranks the pair
  cy(5, n) = std::sqrt(1.0 - 0.9801);

  const auto x = make_set(qx, std::vector<Style>(n, Style::ballet));
  const auto y = make_set(cy, std::vector<Style>(n, Style::ballet));
  const auto ranks = rank_positions(x, y);
  CHECK(ranks[0] == 2);
  const double ra0 = 1.0 - (2.0 - 1.0) / (n - 1.0);
  CHECK(ra0 == doctest::Approx(1.0 - 1.0 / 144.0).epsilon(1e-12));
}

TEST_CASE("rank accuracy: agrees with a brute-force oracle") {
  const auto x = random_set(10, 5, 17);
  const auto y = random_set(10, 5, 19);
  const double got = rank_accuracy(x, y);

  const MatrixXd s = similarity_matrix(x, y);
  double acc = 0.0;
  for (int i = 0; i < 10; ++i) {
    int rank = 1;
    for (int j = 0; j < 10; ++j)
      if (j != i && s(i, j) > s(i, i)) ++rank;
    acc += 1.0 - (rank - 1.0) / 9.0;
  }
  CHECK(got == doctest::Approx(acc / 10.0).epsilon(1e-12));
}

TEST_CASE("class MAP: hand cases for AP") {
  // 2 relevant at ranks 1 and 2 out of 4 -> AP 1.0
  // engineered via descending similarity to a single query
  MatrixXd q(1, 2);
  q << 1.0, 0.0;
  MatrixXd c(4, 2);
  c.row(0) << 0.9, std::sqrt(1 - 0.81);  // relevant, rank 1
  c.row(1) << 0.8, std::sqrt(1 - 0.64);  // relevant, rank 2
  c.row(2) << 0.7, std::sqrt(1 - 0.49);
  c.row(3) << 0.6, std::sqrt(1 - 0.36);
  const auto qs = make_set(q, {Style::ballet});
  auto cs = make_set(c, {Style::ballet, Style::ballet, Style::waltz, Style::waltz});
  auto res = class_map(qs, cs);
  CHECK(res.per_class.at(Style::ballet) == doctest::Approx(1.0).epsilon(1e-12));

  // relevant at ranks 2 and 4 -> AP = (1/2 + 2/4) / 2 = 0.5
  cs.styles = {Style::waltz, Style::ballet, Style::waltz, Style::ballet};
  res = class_map(qs, cs);
  CHECK(res.per_class.at(Style::ballet) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("class MAP: matches the brute-force oracle on random sets") {
  const auto x = random_set(10, 4, 23, 3);
  const auto y = random_set(10, 4, 29, 3);
  const auto res = class_map(x, y);

  const MatrixXd s = similarity_matrix(x, y);
  for (int i = 0; i < 10; ++i) {
    std::vector<int> order(10);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (s(i, a) != s(i, b)) return s(i, a) > s(i, b);
      return y.ids[static_cast<std::size_t>(a)] < y.ids[static_cast<std::size_t>(b)];
    });
    std::vector<int> rel;
    int n_rel = 0;
    for (int j : order) rel.push_back(y.styles[static_cast<std::size_t>(j)] ==
                                              x.styles[static_cast<std::size_t>(i)]
                                          ? 1
                                          : 0);
    for (int j = 0; j < 10; ++j)
      if (y.styles[static_cast<std::size_t>(j)] == x.styles[static_cast<std::size_t>(i)])
        ++n_rel;
    CHECK(res.ap_per_query[static_cast<std::size_t>(i)] ==
          doctest::Approx(oracle_ap(rel, n_rel)).epsilon(1e-12));
  }

  // overall is the query-weighted mean
  const double overall =
      std::accumulate(res.ap_per_query.begin(), res.ap_per_query.end(), 0.0) / 10.0;
  CHECK(res.overall == doctest::Approx(overall).epsilon(1e-12));
}

TEST_CASE("class MAP: singleton classes reduce to reciprocal rank") {
  const int n = 8;
  auto x = random_set(n, 5, 31, 1);
  auto y = random_set(n, 5, 37, 1);
  for (int i = 0; i < n; ++i) {
    x.styles[static_cast<std::size_t>(i)] = static_cast<Style>(i % 8);
    y.styles[static_cast<std::size_t>(i)] = static_cast<Style>(i % 8);
  }
  const auto res = class_map(x, y);
  const auto ranks = rank_positions(x, y);
  for (int i = 0; i < n; ++i)
    CHECK(res.ap_per_query[static_cast<std::size_t>(i)] ==
          doctest::Approx(1.0 / ranks[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("binomial tail: analytic cases") {
  CHECK(binomial_pvalue(10, 10, 0.5) == doctest::Approx(std::pow(2.0, -10.0)).epsilon(1e-12));
  CHECK(binomial_pvalue(0, 25, 0.25) == 1.0);
  CHECK(binomial_pvalue(82, 144, 0.25) < 1e-12);
  CHECK(binomial_pvalue(82, 144, 0.25) > 0.0);
}

TEST_CASE("binomial tail: monotone in successes, bounded in [0, 1]") {
  double prev = 1.1;
  for (int s = 0; s <= 30; s += 3) {
    const double p = binomial_pvalue(s, 30, 0.25);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(p < prev + 1e-15);
    prev = p;
  }
}

TEST_CASE("map baseline: all-relevant and one-of-two enumerated exactly") {
  const std::vector<Style> all_same(5, Style::tango);
  const auto base_all = random_map_baseline(all_same, 100000, 3);
  CHECK(base_all.expected.at(Style::tango) == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<Style> one_of_two = {Style::tango, Style::waltz};
  const auto base = random_map_baseline(one_of_two, 100000, 3);
  CHECK(base.expected.at(Style::tango) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(base.expected.at(Style::waltz) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(base.std_error.at(Style::tango) == 0.0);
  CHECK(base.overall == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("map baseline: Monte Carlo agrees with the closed form") {
  // E[AP] = (1/n) (H_n + (R-1)/(n-1) (n - H_n)) for R relevant of n
  const int n = 10, r = 3;
  double hn = 0.0;
  for (int j = 1; j <= n; ++j) hn += 1.0 / j;
  const double closed = (hn + (r - 1.0) / (n - 1.0) * (n - hn)) / n;

  std::vector<Style> labels;
  for (int i = 0; i < r; ++i) labels.push_back(Style::ballet);
  for (int i = r; i < n; ++i)
    labels.push_back(i % 2 ? Style::waltz : Style::tango);
  const auto base = random_map_baseline(labels, 200000, 7);
  const double se = base.std_error.at(Style::ballet);
  CHECK(se > 0.0);
  CHECK(std::abs(base.expected.at(Style::ballet) - closed) < 5.0 * se);
}

TEST_CASE("permutation test: perfect clustering reaches the minimum p") {
  const int classes = 4, per = 5, n = classes * per;
  MatrixXd m(n, classes + n);
  m.setZero();
  std::vector<Style> styles;
  for (int i = 0; i < n; ++i) {
    // tight, separated clusters; distinct vectors so ties cannot let a
    // permuted labeling reproduce a perfect MAP
    m(i, i % classes) = 1.0;
    m(i, classes + i) = 0.05;
    styles.push_back(static_cast<Style>(i % classes));
  }
  const auto x = make_set(m, styles);
  const auto res = permutation_test_map(x, x, 200, 5);
  for (const auto& [cls, p] : res.p_per_class)
    CHECK(p == doctest::Approx(1.0 / 201.0).epsilon(1e-12));
  CHECK(res.p_overall == doctest::Approx(1.0 / 201.0).epsilon(1e-12));

  const auto res2 = permutation_test_map(x, x, 200, 5);
  CHECK(res2.p_overall == res.p_overall);  // seeded determinism
}

TEST_CASE("metrics are invariant under a common orthogonal transform") {
  const int n = 12, k = 6;
  auto x = random_set(n, k, 41, 3);
  auto y = random_set(n, k, 43, 3);
  const auto pa = pair_accuracy(x, y);
  const double ra = rank_accuracy(x, y);
  const auto cm = class_map(x, y);

  // orthogonalize a random matrix by Gram-Schmidt
  Rng rng(47);
  MatrixXd g(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(g);
  const MatrixXd q = qr.householderQ();

  auto xt = x;
  auto yt = y;
  xt.vecs = x.vecs * q;
  yt.vecs = y.vecs * q;
  // positive rescaling of single embeddings changes nothing either
  xt.vecs.row(3) *= 7.5;
  yt.vecs.row(8) *= 0.02;

  const auto pa2 = pair_accuracy(xt, yt);
  CHECK(pa2.successes == pa.successes);
  CHECK(rank_accuracy(xt, yt) == doctest::Approx(ra).epsilon(1e-12));
  const auto cm2 = class_map(xt, yt);
  CHECK(cm2.overall == doctest::Approx(cm.overall).epsilon(1e-12));
}

TEST_CASE("report: serialize and parse are exact inverses") {
  RetrievalReport r;
  r.config_hash = "00ff00ff00ff00ff";
  r.fold = 2;
  r.runs = 3;
  r.seeds = {42, 7919, 123456789};
  r.queries = 148;
  r.audio_params = 12892;
  r.movement_params = 15164;
  r.target_frame = "clip_0001";
  r.workers = 4;
  r.baseline.overall = 0.13907;
  r.baseline.expected[Style::ballet] = 0.1037;
  r.baseline.std_error[Style::ballet] = 0.00031;
  r.baseline.expected[Style::waltz] = 1.0 / 3.0;
  r.baseline.std_error[Style::waltz] = 0.0;

  auto fill = [](DirectionMetrics& m, const std::string& name, double shift) {
    m.direction = name;
    m.pair_accuracy = 0.57 + shift;
    m.pair_successes = 12345;
    m.pair_trials = 21756;
    m.significance_trials = 148;
    m.pair_p = 3.25e-17;
    m.rank_accuracy = 0.75 - shift;
    m.rank_p = 1e-9;
    m.map_average = 0.26;
    m.map_overall = 0.28;
    m.map_per_class[Style::ballet] = 0.41;
    m.perm_p_per_class[Style::ballet] = 0.000999000999000999;
    m.map_per_class[Style::waltz] = 0.43;
    m.perm_p_per_class[Style::waltz] = 0.002;
    m.perm_p_overall = 0.001;
  };
  fill(r.audio_to_movement, "audio_to_movement", 0.0);
  fill(r.movement_to_audio, "movement_to_audio", 0.01);

  const std::string text = serialize_report(r);
  const RetrievalReport back = parse_report(text);
  CHECK(serialize_report(back) == text);
  CHECK(back.seeds == r.seeds);
  CHECK(back.audio_to_movement.pair_p == r.audio_to_movement.pair_p);
  CHECK(back.movement_to_audio.map_per_class.at(Style::waltz) == 0.43);
  CHECK_THROWS_AS(parse_report("musedance-report 1\n"), DataError);
}
