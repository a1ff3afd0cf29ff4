#include "musedance/dcca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "musedance/common.hpp"

namespace musedance::dcca {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd centered(const MatrixXd& m) {
  return m.rowwise() - m.colwise().mean();
}

// tr(Cxx^{-1} Cxy Cyy^{-1} Cyx), algebraically ||T||_F^2.
double trace_objective(const CovarianceStats& cs, MatrixXd& cxx_inv, MatrixXd& cyy_inv) {
  Eigen::LLT<MatrixXd> lx(cs.cxx);
  Eigen::LLT<MatrixXd> ly(cs.cyy);
  if (lx.info() != Eigen::Success)
    throw NotPositiveDefinite("x covariance is not positive definite");
  if (ly.info() != Eigen::Success)
    throw NotPositiveDefinite("y covariance is not positive definite");
  cxx_inv = lx.solve(MatrixXd::Identity(cs.cxx.rows(), cs.cxx.cols()));
  cyy_inv = ly.solve(MatrixXd::Identity(cs.cyy.rows(), cs.cyy.cols()));
  return (cxx_inv * cs.cxy * cyy_inv * cs.cxy.transpose()).trace();
}

int effective_rank(const MatrixXd& cov_unreg) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov_unreg);
  const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
  const double cut = lmax * 1e-10;
  int rank = 0;
  for (long i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > cut) ++rank;
  return rank;
}

}  // namespace

CovarianceStats covariance_stats(const MatrixXd& x, const MatrixXd& y, double r_reg) {
  if (x.rows() != y.rows()) throw ConfigError("views must have the same number of rows");
  if (x.rows() < 2) throw ConfigError("covariance needs at least two observations");
  if (r_reg < 0.0) throw ConfigError("regularization weight must be non-negative");
  const double denom = static_cast<double>(x.rows() - 1);
  const MatrixXd xc = centered(x);
  const MatrixXd yc = centered(y);
  CovarianceStats cs;
  cs.n = static_cast<int>(x.rows());
  cs.r_reg = r_reg;
  cs.cxx = xc.transpose() * xc / denom + r_reg * MatrixXd::Identity(x.cols(), x.cols());
  cs.cyy = yc.transpose() * yc / denom + r_reg * MatrixXd::Identity(y.cols(), y.cols());
  cs.cxy = xc.transpose() * yc / denom;
  return cs;
}

MatrixXd inv_sqrt_sym(const MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) throw ConfigError("inv_sqrt_sym expects a square matrix");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const VectorXd& lambda = es.eigenvalues();
  for (long i = 0; i < lambda.size(); ++i)
    if (lambda[i] <= tol)
      throw NotPositiveDefinite("eigenvalue " + std::to_string(lambda[i]) +
                                " at or below tolerance " + std::to_string(tol));
  const VectorXd inv_sqrt = lambda.array().rsqrt().matrix();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
}

double dcca_loss(const MatrixXd& x, const MatrixXd& y, double r_reg) {
  const CovarianceStats cs = covariance_stats(x, y, r_reg);
  const MatrixXd t = inv_sqrt_sym(cs.cxx) * cs.cxy * inv_sqrt_sym(cs.cyy);
  return -std::sqrt(t.squaredNorm());
}

LossGrad dcca_gradient(const MatrixXd& x, const MatrixXd& y, double r_reg) {
  const CovarianceStats cs = covariance_stats(x, y, r_reg);
  MatrixXd cxx_inv, cyy_inv;
  const double f = trace_objective(cs, cxx_inv, cyy_inv);

  // d f / d covariances
  const MatrixXd u = cxx_inv * cs.cxy;           // d_x x d_y
  const MatrixXd g_xy = 2.0 * u * cyy_inv;       // d f / d Cxy
  const MatrixXd s_x = cs.cxy * cyy_inv * cs.cxy.transpose();
  const MatrixXd g_xx = -cxx_inv * s_x * cxx_inv;
  const MatrixXd s_y = cs.cxy.transpose() * cxx_inv * cs.cxy;
  const MatrixXd g_yy = -cyy_inv * s_y * cyy_inv;

  const double denom = static_cast<double>(cs.n - 1);
  const MatrixXd xc = centered(x);
  const MatrixXd yc = centered(y);
  MatrixXd dfx = (2.0 * xc * g_xx + yc * g_xy.transpose()) / denom;
  MatrixXd dfy = (2.0 * yc * g_yy + xc * g_xy) / denom;

  // back through the centering
  dfx = centered(dfx);
  dfy = centered(dfy);

  // loss = -sqrt(f)
  const double scale = -0.5 / std::sqrt(std::max(f, 1e-30));
  LossGrad lg;
  lg.loss = -std::sqrt(std::max(f, 0.0));
  lg.dx = scale * dfx;
  lg.dy = scale * dfy;
  return lg;
}

CcaModel fit_linear_cca(const MatrixXd& x, const MatrixXd& y, int k, double r_reg) {
  if (k < 1) throw ConfigError("component count must be positive");
  if (k > std::min(x.cols(), y.cols()))
    throw ConfigError("component count exceeds view dimensionality");
  if (x.rows() <= k) throw ConfigError("need more observations than components");

  const CovarianceStats cs = covariance_stats(x, y, r_reg);

  const int rank_x = effective_rank(cs.cxx - r_reg * MatrixXd::Identity(x.cols(), x.cols()));
  const int rank_y = effective_rank(cs.cyy - r_reg * MatrixXd::Identity(y.cols(), y.cols()));
  int k_eff = std::min({k, rank_x, rank_y});
  if (k_eff < k) {
    log_warn("rank-deficient view: reducing CCA components from " + std::to_string(k) +
             " to " + std::to_string(k_eff));
  }
  if (k_eff < 1) throw NumericError("views have no usable variance");

  const MatrixXd a = inv_sqrt_sym(cs.cxx);
  const MatrixXd b = inv_sqrt_sym(cs.cyy);
  const MatrixXd t = a * cs.cxy * b;
  Eigen::BDCSVD<MatrixXd> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);

  CcaModel model;
  model.k = k_eff;
  model.r_reg = r_reg;
  model.mean_x = x.colwise().mean().transpose();
  model.mean_y = y.colwise().mean().transpose();
  model.w_x = a * svd.matrixU().leftCols(k_eff);
  model.w_y = b * svd.matrixV().leftCols(k_eff);
  model.corrs = svd.singularValues().head(k_eff).cwiseMin(1.0).cwiseMax(0.0);
  return model;
}

MatrixXd project(const CcaModel& model, const MatrixXd& z, View which) {
  const MatrixXd& w = which == View::x ? model.w_x : model.w_y;
  const VectorXd& mean = which == View::x ? model.mean_x : model.mean_y;
  if (z.cols() != w.rows())
    throw ConfigError("projection input has " + std::to_string(z.cols()) +
                      " columns, view expects " + std::to_string(w.rows()));
  return (z.rowwise() - mean.transpose()) * w;
}

}  // namespace musedance::dcca
