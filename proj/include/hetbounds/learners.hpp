#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace hb::learners {

// Penalized-ML logistic selection model on the interacted design
// [1, x, d, d*x], fitted by damped Newton steps.
class LogisticSelection {
 public:
  // ridge penalty = ridge_scale * n_train on all coefficients
  static LogisticSelection fit(const Eigen::MatrixXd& x_train,
                               const Eigen::VectorXi& d_train,
                               const Eigen::VectorXi& s_train,
                               double ridge_scale = 1e-6);

  // raw sigmoid prediction, clipping is the caller's policy
  double predict(const Eigen::RowVectorXd& x, int d) const;
  Eigen::VectorXd predict_all(const Eigen::MatrixXd& x, int d) const;

  const Eigen::VectorXd& coefficients() const { return beta_; }
  bool converged() const { return converged_; }
  bool separation_fallback() const { return separation_fallback_; }
  int iterations() const { return iterations_; }

 private:
  Eigen::VectorXd beta_;
  bool converged_ = false;
  bool separation_fallback_ = false;
  int iterations_ = 0;
};

// Check-loss (pinball) linear quantile regression, minimized by IRLS with a
// smoothing parameter decreasing to a floor. Design is [1, x].
class LinearQuantile {
 public:
  // warm_start (if non-empty) primes the coefficient vector; used when
  // sweeping an ordered grid of quantile levels.
  static LinearQuantile fit(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                            double u, const Eigen::VectorXd& warm_start = Eigen::VectorXd());

  double predict(const Eigen::RowVectorXd& x) const;
  Eigen::VectorXd predict_all(const Eigen::MatrixXd& x) const;

  const Eigen::VectorXd& coefficients() const { return beta_; }
  bool underdetermined() const { return underdetermined_; }

 private:
  Eigen::VectorXd beta_;
  bool underdetermined_ = false;
};

double check_loss(const Eigen::VectorXd& residuals, double u);

}  // namespace hb::learners
