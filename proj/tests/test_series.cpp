#include <doctest.h>

#include <cmath>

#include "hetbounds/math.hpp"
#include "hetbounds/series.hpp"

using namespace hb;
using series::BasisSpec;

namespace {

Eigen::MatrixXd uniform_column(Eigen::Index n, std::uint64_t seed) {
  hb::math::Rng rng(seed, 0);
  Eigen::MatrixXd z(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) z(i, 0) = rng.uniform();
  return z;
}

}  // namespace

TEST_CASE("constant basis is a column of ones") {
  auto z = uniform_column(50, 1);
  BasisSpec spec;
  spec.kind = BasisSpec::Kind::kConstant;
  auto basis = series::build_basis(z, spec);
  CHECK(basis.dimension() == 1);
  auto design = basis.design(z);
  CHECK(design.col(0).minCoeff() == 1.0);
  CHECK(design.col(0).maxCoeff() == 1.0);
}

TEST_CASE("indicator basis over 8 categories gives 8 orthogonal dummies") {
  const int n = 160;
  Eigen::MatrixXd z(n, 1);
  for (int i = 0; i < n; ++i) z(i, 0) = static_cast<double>(i % 8);
  BasisSpec spec;
  spec.kind = BasisSpec::Kind::kIndicator;
  auto basis = series::build_basis(z, spec);
  CHECK(basis.dimension() == 8);
  auto design = basis.design(z);
  for (int i = 0; i < n; ++i) CHECK(design.row(i).sum() == 1.0);
  Eigen::MatrixXd gram = design.transpose() * design;
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      if (a != b) CHECK(gram(a, b) == 0.0);
    }
  }
}

TEST_CASE("order-4 spline with 3 interior knots: k = 7 and partition of unity") {
  auto z = uniform_column(400, 3);
  BasisSpec spec;
  spec.kind = BasisSpec::Kind::kBSpline;
  spec.order = 4;
  spec.interior_knots = 3;
  auto basis = series::build_basis(z, spec);
  CHECK(basis.dimension() == 7);
  auto design = basis.design(z);
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    CHECK(design.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(design.row(i).minCoeff() >= 0.0);
  }
  // evaluation beyond the data range clamps
  Eigen::RowVectorXd past(1);
  past << 2.0;
  CHECK(basis.evaluate(past).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("loocv selects the linear basis on linear data") {
  const Eigen::Index n = 800;
  auto z = uniform_column(n, 7);
  hb::math::Rng rng(8, 0);
  Eigen::VectorXd psi(n);
  for (Eigen::Index i = 0; i < n; ++i) psi[i] = 1.0 + 2.0 * z(i, 0) + 0.3 * rng.normal();
  BasisSpec constant;
  constant.kind = BasisSpec::Kind::kConstant;
  BasisSpec linear;
  linear.kind = BasisSpec::Kind::kBSpline;
  linear.order = 2;
  linear.interior_knots = 0;
  BasisSpec cubic;
  cubic.kind = BasisSpec::Kind::kBSpline;
  cubic.order = 4;
  cubic.interior_knots = 3;
  auto res = series::loocv_select(z, psi, {constant, linear, cubic});
  CHECK(res.selected == 1);
}

TEST_CASE("loocv tie and disqualification rules") {
  auto z = uniform_column(6, 11);
  hb::math::Rng rng(12, 0);
  Eigen::VectorXd psi(6);
  for (Eigen::Index i = 0; i < 6; ++i) psi[i] = rng.normal();
  BasisSpec constant;
  constant.kind = BasisSpec::Kind::kConstant;
  BasisSpec rich;
  rich.kind = BasisSpec::Kind::kBSpline;
  rich.order = 4;
  rich.interior_knots = 5;  // k = 9 > n: disqualified
  auto res = series::loocv_select(z, psi, {rich, constant, constant});
  CHECK(res.selected == 1);  // first of the duplicate constants
  CHECK(!std::isfinite(res.scores[0]));
}

TEST_CASE("projection onto a constant reproduces the mean") {
  const Eigen::Index n = 300;
  auto z = uniform_column(n, 13);
  hb::math::Rng rng(14, 0);
  scores::ScoreVector psi;
  psi.psi_L.resize(n);
  psi.psi_U.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    psi.psi_L[i] = rng.normal();
    psi.psi_U[i] = 2.0 + rng.normal();
  }
  BasisSpec constant;
  constant.kind = BasisSpec::Kind::kConstant;
  auto basis = series::build_basis(z, constant);
  auto curve = series::project(z, psi, basis, basis);
  Eigen::RowVectorXd at(1);
  at << 0.77;
  CHECK(curve.theta_L(at) == doctest::Approx(psi.psi_L.mean()).epsilon(1e-12));
  CHECK(curve.theta_U(at) == doctest::Approx(psi.psi_U.mean()).epsilon(1e-12));
}

TEST_CASE("interpolating design has zero residuals; normal equations hold") {
  const Eigen::Index n = 500;
  auto z = uniform_column(n, 15);
  scores::ScoreVector psi;
  psi.psi_L.resize(n);
  psi.psi_U.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    psi.psi_L[i] = 3.0 - 0.5 * z(i, 0);
    psi.psi_U[i] = 1.0 + z(i, 0);
  }
  BasisSpec linear;
  linear.kind = BasisSpec::Kind::kBSpline;
  linear.order = 2;
  linear.interior_knots = 0;
  auto basis = series::build_basis(z, linear);
  auto curve = series::project(z, psi, basis, basis);
  CHECK(curve.residuals_L().lpNorm<Eigen::Infinity>() < 1e-10);
  // residual orthogonality on a noisy fit
  hb::math::Rng rng(16, 0);
  for (Eigen::Index i = 0; i < n; ++i) psi.psi_L[i] += rng.normal();
  auto noisy = series::project(z, psi, basis, basis);
  Eigen::VectorXd grad = basis.design(z).transpose() * noisy.residuals_L();
  CHECK(grad.lpNorm<Eigen::Infinity>() / static_cast<double>(n) < 1e-8);
}

TEST_CASE("orthonormalized design reduces to the direct average") {
  const Eigen::Index n = 200;
  Eigen::MatrixXd z(n, 1);
  // design [1, r] with r = +-1 balanced: (1/n) B'B = I
  for (Eigen::Index i = 0; i < n; ++i) z(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;
  BasisSpec bins;
  bins.kind = BasisSpec::Kind::kIndicatorBins;
  bins.bin_edges = {-2.0, 0.0, 2.0};
  auto basis = series::build_basis(z, bins);
  hb::math::Rng rng(17, 0);
  Eigen::VectorXd psi(n);
  for (Eigen::Index i = 0; i < n; ++i) psi[i] = rng.normal() + z(i, 0);
  Eigen::MatrixXd design = basis.design(z);
  // indicator bins are orthogonal: beta = (B'B)^{-1} B'psi = groupwise means
  Eigen::VectorXd beta =
      (design.transpose() * design).ldlt().solve(design.transpose() * psi);
  double mean_low = 0.0, mean_high = 0.0;
  int c_low = 0, c_high = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (z(i, 0) < 0) {
      mean_low += psi[i];
      ++c_low;
    } else {
      mean_high += psi[i];
      ++c_high;
    }
  }
  CHECK(beta[0] == doctest::Approx(mean_low / c_low).epsilon(1e-10));
  CHECK(beta[1] == doctest::Approx(mean_high / c_high).epsilon(1e-10));
}

TEST_CASE("hat diagonal sums to the basis dimension") {
  const Eigen::Index n = 150;
  auto z = uniform_column(n, 19);
  BasisSpec cubic;
  cubic.kind = BasisSpec::Kind::kBSpline;
  cubic.order = 4;
  cubic.interior_knots = 2;
  auto basis = series::build_basis(z, cubic);
  Eigen::MatrixXd design = basis.design(z);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::MatrixXd thin_q = qr.householderQ() * Eigen::MatrixXd::Identity(n, design.cols());
  double trace = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) trace += thin_q.row(i).squaredNorm();
  CHECK(trace == doctest::Approx(static_cast<double>(basis.dimension())).epsilon(1e-10));
}

TEST_CASE("variance field: constant basis, perfect correlation, independence") {
  const Eigen::Index n = 10000;
  auto z = uniform_column(n, 21);
  hb::math::Rng rng(22, 0);
  scores::ScoreVector psi;
  psi.psi_L.resize(n);
  psi.psi_U.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    psi.psi_L[i] = rng.normal();
    psi.psi_U[i] = rng.normal();  // independent of psi_L
  }
  BasisSpec constant;
  constant.kind = BasisSpec::Kind::kConstant;
  auto basis = series::build_basis(z, constant);
  auto curve = series::project(z, psi, basis, basis);
  Eigen::RowVectorXd at(1);
  at << 0.3;
  auto f = curve.variance(at);
  const double var_L = (psi.psi_L.array() - psi.psi_L.mean()).square().mean();
  CHECK(f.sigma_L * f.sigma_L == doctest::Approx(var_L).epsilon(1e-10));
  CHECK(std::fabs(f.rho) < 0.03);
  CHECK(f.omega(0, 1) == doctest::Approx(f.rho * f.sigma_L * f.sigma_U));

  // identical residuals clip rho just below one
  scores::ScoreVector same;
  same.psi_L = psi.psi_L;
  same.psi_U = psi.psi_L;
  auto curve2 = series::project(z, same, basis, basis);
  auto f2 = curve2.variance(at);
  CHECK(f2.rho == doctest::Approx(1.0 - 1e-10));
}

TEST_CASE("affine invariance of the curve and variance field") {
  const Eigen::Index n = 400;
  auto z = uniform_column(n, 23);
  hb::math::Rng rng(24, 0);
  scores::ScoreVector psi;
  psi.psi_L.resize(n);
  psi.psi_U.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    psi.psi_L[i] = z(i, 0) + 0.5 * rng.normal();
    psi.psi_U[i] = 1.0 + z(i, 0) + 0.5 * rng.normal();
  }
  BasisSpec linear;
  linear.kind = BasisSpec::Kind::kBSpline;
  linear.order = 2;
  auto basis = series::build_basis(z, linear);
  auto base = series::project(z, psi, basis, basis);
  const double c = -3.0;
  scores::ScoreVector scaled;
  scaled.psi_L = c * psi.psi_L;
  scaled.psi_U = c * psi.psi_U;
  auto curve = series::project(z, scaled, basis, basis);
  Eigen::RowVectorXd at(1);
  at << 0.6;
  CHECK(curve.theta_L(at) == doctest::Approx(c * base.theta_L(at)).epsilon(1e-10));
  auto f0 = base.variance(at);
  auto f1 = curve.variance(at);
  CHECK(f1.sigma_L == doctest::Approx(std::fabs(c) * f0.sigma_L).epsilon(1e-10));
  CHECK(f1.rho == doctest::Approx(f0.rho).epsilon(1e-10));
  // flipping only one side flips the correlation sign
  scores::ScoreVector flipped;
  flipped.psi_L = psi.psi_L;
  flipped.psi_U = c * psi.psi_U;
  auto curve2 = series::project(z, flipped, basis, basis);
  auto f2 = curve2.variance(at);
  CHECK(f2.rho == doctest::Approx(-f0.rho).epsilon(1e-10));
}

TEST_CASE("rank-deficient design drops pivoted columns with a warning") {
  const int n = 90;
  Eigen::MatrixXd z(n, 1);
  for (int i = 0; i < n; ++i) z(i, 0) = static_cast<double>(i % 3);
  BasisSpec spec;
  spec.kind = BasisSpec::Kind::kIndicatorBins;
  spec.bin_edges = {0.0, 0.5, 1.5, 2.5, 3.5, 4.5};  // last two bins empty
  auto basis = series::build_basis(z, spec);
  CHECK(basis.dimension() == 3);
  CHECK(basis.dropped_columns().size() == 2);
}
