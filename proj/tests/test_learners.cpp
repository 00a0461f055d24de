#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hetbounds/learners.hpp"
#include "hetbounds/math.hpp"

using namespace hb::learners;

TEST_CASE("logistic with all-selected data saturates upward") {
  hb::math::Rng rng(5, 0);
  const int n = 400;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXi d(n), s(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform();
    x(i, 1) = rng.uniform();
    d[i] = i % 2;
    s[i] = 1;
  }
  auto m = LogisticSelection::fit(x, d, s);
  Eigen::RowVectorXd probe(2);
  probe << 0.5, 0.5;
  CHECK(m.predict(probe, 0) > 0.99);
  CHECK(m.predict(probe, 1) > 0.99);
}

TEST_CASE("logistic recovers a flat selection rate") {
  hb::math::Rng rng(11, 0);
  const int n = 5000;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXi d(n), s(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.uniform();
    d[i] = rng.uniform() < 0.5 ? 1 : 0;
    s[i] = rng.uniform() < 0.6 ? 1 : 0;
  }
  auto m = LogisticSelection::fit(x, d, s);
  for (double xv : {0.25, 0.5, 0.75}) {
    Eigen::RowVectorXd probe = Eigen::RowVectorXd::Constant(3, xv);
    CHECK(std::fabs(m.predict(probe, 0) - 0.6) < 0.03);
    CHECK(std::fabs(m.predict(probe, 1) - 0.6) < 0.03);
  }
}

TEST_CASE("intercept-only logistic equals arm-wise frequencies") {
  Eigen::MatrixXd x(12, 0);
  Eigen::VectorXi d(12), s(12);
  // treated: 3/6 selected, control: 5/6 selected
  for (int i = 0; i < 12; ++i) {
    d[i] = i < 6 ? 1 : 0;
    s[i] = i < 6 ? (i < 3 ? 1 : 0) : (i < 11 ? 1 : 0);
  }
  auto m = LogisticSelection::fit(x, d, s, 1e-9);
  Eigen::RowVectorXd probe(0);
  CHECK(m.predict(probe, 1) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(m.predict(probe, 0) == doctest::Approx(5.0 / 6.0).epsilon(1e-3));
}

TEST_CASE("intercept-only median via check loss") {
  Eigen::MatrixXd x(7, 0);
  Eigen::VectorXd y(7);
  y << 3.0, -1.0, 7.0, 2.0, 11.0, 0.5, 2.5;
  auto m = LinearQuantile::fit(x, y, 0.5);
  Eigen::RowVectorXd probe(0);
  CHECK(m.predict(probe) == doctest::Approx(2.5).epsilon(1e-3));
}

TEST_CASE("noiseless linear outcome recovered at any level") {
  hb::math::Rng rng(17, 0);
  const int n = 300;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform();
    x(i, 1) = rng.uniform();
    y[i] = x(i, 0);
  }
  for (double u : {0.1, 0.5, 0.9}) {
    auto m = LinearQuantile::fit(x, y, u);
    CHECK(std::fabs(m.coefficients()[1] - 1.0) < 1e-4);
    CHECK(std::fabs(m.coefficients()[0]) < 1e-4);
    CHECK(std::fabs(m.coefficients()[2]) < 1e-4);
  }
}

TEST_CASE("extreme quantile lands between the smallest order statistics") {
  hb::math::Rng rng(23, 0);
  const int n = 100;
  Eigen::MatrixXd x(n, 0);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = rng.normal();
  std::vector<double> sorted(y.data(), y.data() + n);
  std::sort(sorted.begin(), sorted.end());
  auto m = LinearQuantile::fit(x, y, 0.01);
  Eigen::RowVectorXd probe(0);
  const double pred = m.predict(probe);
  CHECK(pred >= sorted[0] - 1e-6);
  CHECK(pred <= sorted[1] + 1e-6);
}

TEST_CASE("underdetermined quantile regression warns and still solves") {
  Eigen::MatrixXd x(3, 5);
  x.setRandom();
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 3.0;
  auto m = LinearQuantile::fit(x, y, 0.5);
  CHECK(m.underdetermined());
  CHECK(std::isfinite(m.predict(x.row(0))));
}

TEST_CASE("check loss is the pinball loss") {
  Eigen::VectorXd r(3);
  r << 1.0, -2.0, 0.0;
  CHECK(check_loss(r, 0.3) == doctest::Approx(0.3 * 1.0 + 0.7 * 2.0));
}
