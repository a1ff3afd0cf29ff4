#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "musedance/common.hpp"
#include "musedance/dcca.hpp"
#include "musedance/synth.hpp"

using namespace musedance;
using namespace musedance::dcca;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

}  // namespace

TEST_CASE("inv_sqrt_sym: identity and analytic diagonal") {
  CHECK((inv_sqrt_sym(MatrixXd::Identity(4, 4)) - MatrixXd::Identity(4, 4))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  MatrixXd d = MatrixXd::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  const MatrixXd r = inv_sqrt_sym(d);
  CHECK(r(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(std::abs(r(0, 1)) < 1e-15);
}

TEST_CASE("inv_sqrt_sym: defining property on a random SPD matrix") {
  const MatrixXd g = random_matrix(8, 8, 3);
  const MatrixXd spd = g * g.transpose() + MatrixXd::Identity(8, 8);
  const MatrixXd r = inv_sqrt_sym(spd);
  CHECK((r - r.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((r * r * spd - MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("inv_sqrt_sym: rank-deficient input is rejected") {
  VectorXd v = VectorXd::LinSpaced(4, 1.0, 4.0);
  const MatrixXd rank1 = v * v.transpose();
  CHECK_THROWS_AS(inv_sqrt_sym(rank1), NotPositiveDefinite);
}

TEST_CASE("loss: identical full-rank views approach -sqrt(k)") {
  const MatrixXd x = random_matrix(400, 4, 7);
  const double loss = dcca_loss(x, x, 1e-12);
  CHECK(loss == doctest::Approx(-2.0).epsilon(1e-6));
}

TEST_CASE("loss: independent views have small correlation at large n") {
  const MatrixXd x = random_matrix(10000, 4, 11);
  const MatrixXd y = random_matrix(10000, 4, 13);
  CHECK(std::abs(dcca_loss(x, y, 1e-8)) < 0.1);
}

TEST_CASE("loss: sign flips of one view cancel") {
  const MatrixXd x = random_matrix(100, 3, 17);
  const MatrixXd y = random_matrix(100, 3, 19) + 0.5 * x;
  CHECK(dcca_loss(x, y, 1e-6) == doctest::Approx(dcca_loss(x, -y, 1e-6)).epsilon(1e-12));
}

TEST_CASE("loss: bounded by -sqrt(min(dx, dy)) and 0") {
  for (std::uint64_t seed = 23; seed < 28; ++seed) {
    const MatrixXd x = random_matrix(60, 5, seed);
    const MatrixXd y = random_matrix(60, 3, seed + 100) +
                       0.3 * x.leftCols(3);
    const double loss = dcca_loss(x, y, 1e-6);
    CHECK(loss <= 0.0);
    CHECK(loss >= -std::sqrt(3.0) - 1e-6);
  }
}

TEST_CASE("loss: invariant under well-conditioned affine view transforms") {
  const MatrixXd x = random_matrix(200, 4, 29);
  const MatrixXd y = random_matrix(200, 3, 31) + 0.4 * x.leftCols(3);
  const double base = dcca_loss(x, y, 1e-12);

  const MatrixXd a = MatrixXd::Identity(4, 4) + 0.3 * random_matrix(4, 4, 37);
  Eigen::RowVectorXd shift = Eigen::RowVectorXd::Constant(4, 2.5);
  const MatrixXd xt = (x * a).rowwise() + shift;
  CHECK(rel_err(dcca_loss(xt, y, 1e-12), base) < 1e-6);

  const MatrixXd b = MatrixXd::Identity(3, 3) + 0.25 * random_matrix(3, 3, 41);
  const MatrixXd yt = y * b;
  CHECK(rel_err(dcca_loss(x, yt, 1e-12), base) < 1e-6);
}

TEST_CASE("gradient: matches central finite differences") {
  const int n = 50, dx = 5, dy = 5;
  MatrixXd x = random_matrix(n, dx, 43);
  MatrixXd y = random_matrix(n, dy, 47) + 0.5 * x;
  const double r = 1e-4, step = 1e-3;

  const LossGrad lg = dcca_gradient(x, y, r);
  CHECK(lg.loss == doctest::Approx(dcca_loss(x, y, r)).epsilon(1e-9));

  for (int i = 0; i < n; i += 7) {
    for (int j = 0; j < dx; ++j) {
      const double keep = x(i, j);
      x(i, j) = keep + step;
      const double up = dcca_loss(x, y, r);
      x(i, j) = keep - step;
      const double dn = dcca_loss(x, y, r);
      x(i, j) = keep;
      CHECK(rel_err((up - dn) / (2.0 * step), lg.dx(i, j)) <= 1e-4);
    }
    for (int j = 0; j < dy; ++j) {
      const double keep = y(i, j);
      y(i, j) = keep + step;
      const double up = dcca_loss(x, y, r);
      y(i, j) = keep - step;
      const double dn = dcca_loss(x, y, r);
      y(i, j) = keep;
      CHECK(rel_err((up - dn) / (2.0 * step), lg.dy(i, j)) <= 1e-4);
    }
  }
}

TEST_CASE("gradient: vanishes at a maximally correlated configuration") {
  const MatrixXd x = random_matrix(80, 4, 53);
  const LossGrad lg = dcca_gradient(x, x, 1e-12);
  CHECK(lg.dx.norm() <= 1e-6);
  CHECK(lg.dy.norm() <= 1e-6);
}

TEST_CASE("gradient: joint row permutation permutes gradient rows") {
  const int n = 20;
  const MatrixXd x = random_matrix(n, 3, 59);
  const MatrixXd y = random_matrix(n, 3, 61) + 0.3 * x;
  const LossGrad base = dcca_gradient(x, y, 1e-4);

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = (i * 7 + 3) % n;
  MatrixXd xp(n, 3), yp(n, 3);
  for (int i = 0; i < n; ++i) {
    xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    yp.row(i) = y.row(perm[static_cast<std::size_t>(i)]);
  }
  const LossGrad shuffled = dcca_gradient(xp, yp, 1e-4);
  for (int i = 0; i < n; ++i) {
    CHECK((shuffled.dx.row(i) - base.dx.row(perm[static_cast<std::size_t>(i)]))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK((shuffled.dy.row(i) - base.dy.row(perm[static_cast<std::size_t>(i)]))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("fit: one-dimensional views reduce to |Pearson|") {
  const int n = 500;
  const MatrixXd x = random_matrix(n, 1, 67);
  const MatrixXd noise = random_matrix(n, 1, 71);
  const MatrixXd y = 0.8 * x + 0.6 * noise;

  const CcaModel model = fit_linear_cca(x, y, 1, 1e-12);

  const VectorXd xc = x.col(0).array() - x.col(0).mean();
  const VectorXd yc = y.col(0).array() - y.col(0).mean();
  const double pearson = xc.dot(yc) / std::sqrt(xc.squaredNorm() * yc.squaredNorm());
  CHECK(model.corrs[0] == doctest::Approx(std::abs(pearson)).epsilon(1e-10));
}

TEST_CASE("fit: planted canonical correlations are recovered") {
  const auto [x, y] = synth::generate_gaussian_views(10000, 6, 5, {0.9, 0.5, 0.0}, 73);
  const CcaModel model = fit_linear_cca(x, y, 3, 1e-10);
  CHECK(std::abs(model.corrs[0] - 0.9) < 0.05);
  CHECK(std::abs(model.corrs[1] - 0.5) < 0.05);
  CHECK(std::abs(model.corrs[2] - 0.0) < 0.05);
}

TEST_CASE("fit: identical views saturate every correlation") {
  const MatrixXd x = random_matrix(300, 4, 79);
  const CcaModel model = fit_linear_cca(x, x, 4, 1e-12);
  REQUIRE(model.corrs.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(model.corrs[i] >= 1.0 - 1e-6);
    CHECK(model.corrs[i] <= 1.0);
  }
  // descending order
  for (int i = 1; i < 4; ++i) CHECK(model.corrs[i] <= model.corrs[i - 1] + 1e-12);
}

TEST_CASE("fit: correlations equal the singular values of an explicit T") {
  const int n = 300;
  const MatrixXd x = random_matrix(n, 5, 83);
  const MatrixXd y = random_matrix(n, 4, 89) + 0.4 * x.leftCols(4);
  const double r = 1e-6;
  const CcaModel model = fit_linear_cca(x, y, 4, r);

  // independent centering and covariance assembly
  const MatrixXd xc = x.rowwise() - x.colwise().mean();
  const MatrixXd yc = y.rowwise() - y.colwise().mean();
  const double denom = n - 1.0;
  const MatrixXd cxx =
      xc.transpose() * xc / denom + r * MatrixXd::Identity(5, 5);
  const MatrixXd cyy =
      yc.transpose() * yc / denom + r * MatrixXd::Identity(4, 4);
  const MatrixXd t = inv_sqrt_sym(cxx) * (xc.transpose() * yc / denom) * inv_sqrt_sym(cyy);
  Eigen::JacobiSVD<MatrixXd> svd(t);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(model.corrs[i] - svd.singularValues()[i]) <= 1e-8);
}

TEST_CASE("fit: rank-deficient views reduce k with a warning") {
  MatrixXd x = random_matrix(100, 4, 97);
  x.col(3) = x.col(0);  // dependent column
  const MatrixXd y = random_matrix(100, 4, 101);
  const CcaModel model = fit_linear_cca(x, y, 4, 1e-8);
  CHECK(model.k == 3);
}

TEST_CASE("project: training projections are unit variance and correlate as fitted") {
  const int n = 500;
  const MatrixXd x = random_matrix(n, 5, 103);
  const MatrixXd y = random_matrix(n, 4, 107) + 0.5 * x.leftCols(4);
  const CcaModel model = fit_linear_cca(x, y, 3, 1e-12);

  const MatrixXd px = project(model, x, View::x);
  const MatrixXd py = project(model, y, View::y);
  for (int c = 0; c < 3; ++c) {
    const VectorXd xc = px.col(c).array() - px.col(c).mean();
    const VectorXd yc = py.col(c).array() - py.col(c).mean();
    const double var = xc.squaredNorm() / (n - 1.0);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    const double corr = xc.dot(yc) / std::sqrt(xc.squaredNorm() * yc.squaredNorm());
    CHECK(corr == doctest::Approx(model.corrs[c]).epsilon(1e-8));
  }
  // components are mutually uncorrelated
  const MatrixXd pxc = px.rowwise() - px.colwise().mean();
  const MatrixXd cov = pxc.transpose() * pxc / (n - 1.0);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != b) CHECK(std::abs(cov(a, b)) < 1e-6);
}

TEST_CASE("project: the training mean maps to the zero embedding") {
  const MatrixXd x = random_matrix(100, 4, 109);
  const MatrixXd y = random_matrix(100, 4, 113) + 0.3 * x;
  const CcaModel model = fit_linear_cca(x, y, 2, 1e-8);
  const MatrixXd mean_row = model.mean_x.transpose();
  const MatrixXd emb = project(model, mean_row, View::x);
  CHECK(emb.cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(project(model, random_matrix(3, 5, 1), View::x), ConfigError);
}

TEST_CASE("covariance stats: regularized matrices are positive definite") {
  const MatrixXd x = random_matrix(50, 6, 127);
  const MatrixXd y = random_matrix(50, 3, 131);
  const CovarianceStats cs = covariance_stats(x, y, 1e-4);
  Eigen::SelfAdjointEigenSolver<MatrixXd> ex(cs.cxx), ey(cs.cyy);
  CHECK(ex.eigenvalues().minCoeff() > 0.0);
  CHECK(ey.eigenvalues().minCoeff() > 0.0);
  CHECK((cs.cxx - cs.cxx.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}
