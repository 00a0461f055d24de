#include "hetbounds/learners.hpp"

#include <cmath>
#include <iostream>

#include "hetbounds/error.hpp"

namespace hb::learners {

namespace {

Eigen::MatrixXd interacted_design(const Eigen::MatrixXd& x, const Eigen::VectorXi& d) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd design(n, 2 * p + 2);
  design.col(0).setOnes();
  design.block(0, 1, n, p) = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    double di = static_cast<double>(d[i]);
    design(i, p + 1) = di;
    design.block(i, p + 2, 1, p) = di * x.row(i);
  }
  return design;
}

Eigen::MatrixXd interacted_design_at(const Eigen::MatrixXd& x, int d) {
  Eigen::VectorXi dv = Eigen::VectorXi::Constant(x.rows(), d);
  return interacted_design(x, dv);
}

double sigmoid(double t) {
  if (t >= 0.0) {
    double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(t);
  return e / (1.0 + e);
}

struct NewtonResult {
  Eigen::VectorXd beta;
  bool converged;
  int iterations;
};

NewtonResult ridge_logistic_newton(const Eigen::MatrixXd& design, const Eigen::VectorXd& s,
                                   double lambda, int max_iter) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  auto penalized_negll = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd eta = design * b;
    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double t = eta[i];
      // log(1+exp(t)) - s*t, numerically stable
      double lse = t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
      nll += lse - s[i] * t;
    }
    return nll + 0.5 * lambda * b.squaredNorm();
  };
  double obj = penalized_negll(beta);
  bool converged = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(eta[i]);
      w[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-10);
    }
    Eigen::VectorXd grad = design.transpose() * (s - prob) - lambda * beta;
    if (grad.norm() < 1e-8 * std::max(1.0, static_cast<double>(n))) {
      converged = true;
      break;
    }
    Eigen::MatrixXd hess = design.transpose() * w.asDiagonal() * design;
    hess.diagonal().array() += lambda;
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    double scale = 1.0;
    Eigen::VectorXd cand;
    double cand_obj = obj;
    for (int ls = 0; ls < 30; ++ls) {
      cand = beta + scale * step;
      cand_obj = penalized_negll(cand);
      if (cand_obj <= obj) break;
      scale *= 0.5;
    }
    if (cand_obj > obj) {
      break;  // no descent direction left
    }
    double moved = (cand - beta).norm();
    beta = cand;
    obj = cand_obj;
    if (moved < 1e-10 * (1.0 + beta.norm())) {
      converged = true;
      break;
    }
  }
  return {beta, converged, it};
}

}  // namespace

LogisticSelection LogisticSelection::fit(const Eigen::MatrixXd& x_train,
                                         const Eigen::VectorXi& d_train,
                                         const Eigen::VectorXi& s_train, double ridge_scale) {
  const Eigen::Index n = x_train.rows();
  if (n == 0) throw Error("nuisance_learners", "empty training set for logistic selection");
  if (d_train.minCoeff() == d_train.maxCoeff()) {
    throw Error("nuisance_learners", "logistic selection needs both treatment arms in training data");
  }
  Eigen::MatrixXd design = interacted_design(x_train, d_train);
  Eigen::VectorXd s = s_train.cast<double>();
  double lambda = ridge_scale * static_cast<double>(n);
  auto res = ridge_logistic_newton(design, s, lambda, 100);
  LogisticSelection out;
  out.beta_ = res.beta;
  out.converged_ = res.converged;
  out.iterations_ = res.iterations;
  // Separation shows up as unbounded coefficients under the tiny default
  // penalty; refit with a materially stronger one.
  if (!res.converged || res.beta.lpNorm<Eigen::Infinity>() > 30.0) {
    double strong = std::max(lambda * 1e4, 1e-2);
    auto res2 = ridge_logistic_newton(design, s, strong, 200);
    out.beta_ = res2.beta;
    out.converged_ = res2.converged;
    out.iterations_ = res.iterations + res2.iterations;
    out.separation_fallback_ = true;
    std::cerr << "[nuisance_learners] warning: separation suspected in logistic "
                 "selection fit, refit with penalty "
              << strong << "\n";
  }
  return out;
}

double LogisticSelection::predict(const Eigen::RowVectorXd& x, int d) const {
  const Eigen::Index p = x.cols();
  double eta = beta_[0];
  eta += x * beta_.segment(1, p);
  if (d == 1) {
    eta += beta_[p + 1];
    eta += x * beta_.segment(p + 2, p);
  }
  return sigmoid(eta);
}

Eigen::VectorXd LogisticSelection::predict_all(const Eigen::MatrixXd& x, int d) const {
  Eigen::MatrixXd design = interacted_design_at(x, d);
  Eigen::VectorXd eta = design * beta_;
  Eigen::VectorXd out(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) out[i] = sigmoid(eta[i]);
  return out;
}

double check_loss(const Eigen::VectorXd& residuals, double u) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    double r = residuals[i];
    loss += r > 0.0 ? u * r : (u - 1.0) * r;
  }
  return loss;
}

LinearQuantile LinearQuantile::fit(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                                   double u, const Eigen::VectorXd& warm_start) {
  const Eigen::Index n = x_train.rows();
  if (n == 0) throw Error("nuisance_learners", "empty training set for quantile regression");
  if (!(u > 0.0 && u < 1.0)) throw Error("nuisance_learners", "quantile level outside (0,1)");
  const Eigen::Index p = x_train.cols() + 1;
  Eigen::MatrixXd design(n, p);
  design.col(0).setOnes();
  design.rightCols(x_train.cols()) = x_train;

  LinearQuantile out;
  double base_ridge = 1e-10;
  if (n < p) {
    out.underdetermined_ = true;
    base_ridge = 1e-4;
    std::cerr << "[nuisance_learners] warning: quantile regression with " << n
              << " rows and " << p << " parameters, using regularized solve\n";
  }
  Eigen::VectorXd beta;
  if (warm_start.size() == p) {
    beta = warm_start;
  } else {
    // ls start
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += base_ridge + 1e-8;
    beta = gram.ldlt().solve(design.transpose() * y_train);
  }
  const double y_scale = std::max(1e-8, std::sqrt((y_train.array() - y_train.mean()).square().mean()));
  const double delta_floor = 1e-6 * y_scale;
  // a warm start is assumed near-optimal, so the smoothing can open small
  double delta = (warm_start.size() == p ? 1e-4 : 0.05) * y_scale;
  Eigen::VectorXd w(n);
  for (int it = 0; it < 80; ++it) {
    Eigen::VectorXd r = y_train - design * beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      double asym = r[i] > 0.0 ? u : 1.0 - u;
      w[i] = asym / std::max(std::fabs(r[i]), delta);
    }
    Eigen::MatrixXd gram = design.transpose() * w.asDiagonal() * design;
    gram.diagonal().array() += base_ridge;
    Eigen::VectorXd next = gram.ldlt().solve(design.transpose() * (w.asDiagonal() * y_train));
    double moved = (next - beta).norm() / (1.0 + beta.norm());
    beta = next;
    if (delta > delta_floor) {
      delta = std::max(delta * 0.35, delta_floor);
    } else if (moved < 1e-9) {
      break;
    }
  }
  out.beta_ = beta;
  return out;
}

double LinearQuantile::predict(const Eigen::RowVectorXd& x) const {
  return beta_[0] + x * beta_.tail(beta_.size() - 1);
}

Eigen::VectorXd LinearQuantile::predict_all(const Eigen::MatrixXd& x) const {
  return Eigen::VectorXd::Constant(x.rows(), beta_[0]) + x * beta_.tail(beta_.size() - 1);
}

}  // namespace hb::learners
