#include <doctest.h>

#include <cmath>

#include "hetbounds/pipeline.hpp"

using namespace hb;

TEST_CASE("constant bases collapse to the unconditional means") {
  roy::RoyConfig rc;
  rc.n = 1000;
  rc.p = 3;
  rc.seed = 6;
  auto table = roy::simulate(rc);
  data::HeterogeneitySpec het;
  het.columns = {0};
  het.kinds = {data::ColumnKind::kContinuous};
  pipeline::EstimateConfig ec;
  ec.folds = 2;
  ec.seed = 12;
  series::BasisSpec constant;
  constant.kind = series::BasisSpec::Kind::kConstant;
  ec.basis.candidates = {constant};
  ec.z_eval = {0.1, 0.5, 0.9};
  auto res = pipeline::estimate(table, het, ec);
  const double mean_L = res.scores.psi_L.mean();
  const double mean_U = res.scores.psi_U.mean();
  for (const auto& row : res.rows) {
    CHECK(std::fabs(row.theta_L - mean_L) <= 1e-10 * std::max(1.0, std::fabs(mean_L)));
    CHECK(std::fabs(row.theta_U - mean_U) <= 1e-10 * std::max(1.0, std::fabs(mean_U)));
  }
}

TEST_CASE("pipeline is deterministic given the seed") {
  roy::RoyConfig rc;
  rc.n = 600;
  rc.p = 2;
  rc.seed = 10;
  auto table = roy::simulate(rc);
  data::HeterogeneitySpec het;
  het.columns = {0};
  het.kinds = {data::ColumnKind::kContinuous};
  pipeline::EstimateConfig ec;
  ec.folds = 2;
  ec.seed = 77;
  ec.z_eval = {0.2, 0.5, 0.8};
  ec.bootstrap_reps = 50;
  auto a = pipeline::estimate(table, het, ec);
  auto b = pipeline::estimate(table, het, ec);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].ci_lo == b.rows[i].ci_lo);
    CHECK(a.rows[i].ci_hi == b.rows[i].ci_hi);
  }
  REQUIRE(a.band_rows.size() == b.band_rows.size());
  for (std::size_t i = 0; i < a.band_rows.size(); ++i) {
    CHECK(a.band_rows[i].lo == b.band_rows[i].lo);
  }
}

TEST_CASE("estimated pipeline keeps bounds ordered at most grid points") {
  roy::RoyConfig rc;
  rc.n = 2000;
  rc.p = 3;
  rc.seed = 29;
  auto table = roy::simulate(rc);
  data::HeterogeneitySpec het;
  het.columns = {0};
  het.kinds = {data::ColumnKind::kContinuous};
  pipeline::EstimateConfig ec;
  ec.folds = 2;
  ec.seed = 5;
  ec.grid_points = 41;
  auto res = pipeline::estimate(table, het, ec);
  int ordered = 0;
  for (const auto& row : res.rows) {
    if (row.theta_L <= row.theta_U) ++ordered;
    CHECK(row.ci_lo <= row.ci_hi);
    CHECK(std::isfinite(row.sigma_L));
    CHECK(row.c_hat >= 1.64);
    CHECK(row.c_hat <= 1.97);
  }
  CHECK(ordered >= static_cast<int>(0.9 * res.rows.size()));
}

TEST_CASE("true-nuisance pipeline approaches the oracle curves") {
  roy::RoyConfig rc;
  rc.n = 6000;
  rc.p = 3;
  rc.seed = 44;
  auto table = roy::simulate(rc);
  auto nu = roy::analytic_nuisances(rc, table, nuisance::default_quantile_grid());
  data::HeterogeneitySpec het;
  het.columns = {0};
  het.kinds = {data::ColumnKind::kContinuous};
  pipeline::EstimateConfig ec;
  ec.seed = 3;
  ec.z_eval = {0.1, 0.3, 0.5, 0.7, 0.9};
  auto res = pipeline::estimate_with_nuisance(table, het, nu, ec);
  auto oracle = roy::oracle_bounds(ec.z_eval, rc, 1500000);
  for (std::size_t k = 0; k < ec.z_eval.size(); ++k) {
    CHECK(std::fabs(res.rows[k].theta_L - oracle.lower[k]) < 0.12);
    CHECK(std::fabs(res.rows[k].theta_U - oracle.upper[k]) < 0.12);
  }
}

TEST_CASE("categorical heterogeneity uses the indicator basis") {
  roy::RoyConfig rc;
  rc.n = 900;
  rc.p = 2;
  rc.seed = 61;
  auto table = roy::simulate(rc);
  // discretize the first covariate into 3 categories as the z variable
  pipeline::ZData zd;
  zd.categorical = true;
  zd.z.resize(table.n(), 1);
  for (Eigen::Index i = 0; i < table.n(); ++i) {
    zd.z(i, 0) = std::floor(table.x(i, 0) * 3.0);
  }
  pipeline::EstimateConfig ec;
  ec.folds = 2;
  ec.seed = 9;
  auto res = pipeline::estimate(table, zd, ec);
  CHECK(res.basis_L.kind == series::BasisSpec::Kind::kIndicator);
  CHECK(res.rows.size() == 3);  // one row per category
}
