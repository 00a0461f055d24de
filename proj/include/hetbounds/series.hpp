#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hetbounds/scores.hpp"

namespace hb::series {

// Basis description; knots/categories are resolved from data at build time.
struct BasisSpec {
  enum class Kind { kConstant, kBSpline, kIndicator, kIndicatorBins };
  Kind kind = Kind::kConstant;
  int order = 4;           // b-spline order (= degree + 1)
  int interior_knots = 0;  // quantile-placed
  std::vector<double> bin_edges;  // for kIndicatorBins

  std::string describe() const;
};

// Data-resolved basis, evaluable at new z points.
class ResolvedBasis {
 public:
  static ResolvedBasis resolve(const Eigen::MatrixXd& z, const BasisSpec& spec);

  Eigen::Index dimension() const { return k_; }
  const BasisSpec& spec() const { return spec_; }

  Eigen::RowVectorXd evaluate(const Eigen::RowVectorXd& z) const;
  Eigen::MatrixXd design(const Eigen::MatrixXd& z) const;
  const std::vector<Eigen::Index>& dropped_columns() const { return dropped_; }

  // invoked by build_design when the sample design is rank deficient
  void drop_columns(const std::vector<Eigen::Index>& cols);

 private:
  BasisSpec spec_;
  Eigen::Index k_ = 0;
  // per continuous column: full (padded) knot vector
  std::vector<std::vector<double>> knots_;
  std::vector<double> categories_;  // kIndicator: sorted distinct values
  std::vector<double> edges_;       // kIndicatorBins
  std::vector<Eigen::Index> keep_;  // retained column indices after rank repair
  std::vector<Eigen::Index> dropped_;
  Eigen::Index raw_k_ = 0;

  Eigen::RowVectorXd evaluate_raw(const Eigen::RowVectorXd& z) const;
};

// Resolves the spec on z and returns the design matrix; rank-deficient
// columns are dropped (pivoted QR) with a warning.
ResolvedBasis build_basis(const Eigen::MatrixXd& z, const BasisSpec& spec);

// Closed-form leave-one-out CV for least squares; ties break toward smaller
// basis dimension, then earlier position in `candidates`.
struct LoocvResult {
  std::size_t selected = 0;
  std::vector<double> scores;  // +inf marks a disqualified candidate
};
LoocvResult loocv_select(const Eigen::MatrixXd& z, const Eigen::VectorXd& psi,
                         const std::vector<BasisSpec>& candidates);

struct VarianceField {
  Eigen::Matrix2d omega;
  double sigma_L = 0.0;
  double sigma_U = 0.0;
  double rho = 0.0;
};

// Two separate least squares fits sharing no state beyond the data, plus the
// sandwich ingredients for the 2x2 variance field.
class BoundsCurve {
 public:
  BoundsCurve(ResolvedBasis basis_L, ResolvedBasis basis_U, const Eigen::MatrixXd& z,
              const Eigen::VectorXd& psi_L, const Eigen::VectorXd& psi_U);

  double theta_L(const Eigen::RowVectorXd& z) const;
  double theta_U(const Eigen::RowVectorXd& z) const;
  VarianceField variance(const Eigen::RowVectorXd& z) const;

  const Eigen::VectorXd& beta_L() const { return beta_L_; }
  const Eigen::VectorXd& beta_U() const { return beta_U_; }
  const Eigen::VectorXd& residuals_L() const { return resid_L_; }
  const Eigen::VectorXd& residuals_U() const { return resid_U_; }
  const ResolvedBasis& basis_L() const { return basis_L_; }
  const ResolvedBasis& basis_U() const { return basis_U_; }
  Eigen::Index sample_size() const { return n_; }

 private:
  ResolvedBasis basis_L_;
  ResolvedBasis basis_U_;
  Eigen::Index n_;
  Eigen::VectorXd beta_L_, beta_U_;
  Eigen::VectorXd resid_L_, resid_U_;
  // Q^{-1} M Q^{-1} sandwich pieces, precomputed
  Eigen::MatrixXd v_LL_, v_UU_, v_LU_;
};

BoundsCurve project(const Eigen::MatrixXd& z, const scores::ScoreVector& psi,
                    const ResolvedBasis& basis_L, const ResolvedBasis& basis_U);

// Weighted least squares solve used by the multiplier bootstrap.
Eigen::VectorXd weighted_ls(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& weights);

}  // namespace hb::series
