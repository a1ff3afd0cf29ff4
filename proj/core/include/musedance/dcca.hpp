#pragma once

#include <Eigen/Core>
#include <utility>

namespace musedance::dcca {

struct CovarianceStats {
  Eigen::MatrixXd cxx;  // regularized, zero-centered, 1/(n-1) normalized
  Eigen::MatrixXd cyy;
  Eigen::MatrixXd cxy;
  double r_reg = 0.0;
  int n = 0;
};

CovarianceStats covariance_stats(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                 double r_reg);

// Q diag(lambda^{-1/2}) Q^T. Throws NotPositiveDefinite when any eigenvalue
// falls at or below the tolerance.
Eigen::MatrixXd inv_sqrt_sym(const Eigen::MatrixXd& m, double tol = 1e-12);

// -||T||_F with T = Cxx^{-1/2} Cxy Cyy^{-1/2}; rows of x and y are paired
// observations.
double dcca_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double r_reg);

struct LossGrad {
  double loss = 0.0;
  Eigen::MatrixXd dx;
  Eigen::MatrixXd dy;
};

// Exact gradient of dcca_loss, including the centering and 1/(n-1) factors,
// computed through the inverse-covariance form of the objective.
LossGrad dcca_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double r_reg);

enum class View { x, y };

struct CcaModel {
  Eigen::MatrixXd w_x;   // d_x x k
  Eigen::MatrixXd w_y;   // d_y x k
  Eigen::VectorXd mean_x;
  Eigen::VectorXd mean_y;
  Eigen::VectorXd corrs;  // descending, in [0, 1]
  int k = 0;
  double r_reg = 0.0;
};

// Canonical weights from the SVD of T. If a view is rank deficient the
// component count is reduced with a warning.
CcaModel fit_linear_cca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int k,
                        double r_reg);

// (Z - mean) * w for the requested view.
Eigen::MatrixXd project(const CcaModel& model, const Eigen::MatrixXd& z, View which);

}  // namespace musedance::dcca
