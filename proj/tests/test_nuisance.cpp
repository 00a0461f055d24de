#include <doctest.h>

#include <cmath>

#include "hetbounds/math.hpp"
#include "hetbounds/nuisance.hpp"
#include "hetbounds/roy.hpp"

using namespace hb;

namespace {

data::ObservationTable constant_dgp(Eigen::Index n, std::uint64_t seed) {
  hb::math::Rng rng(seed, 0);
  data::ObservationTable t;
  t.x.resize(n, 2);
  t.d_treat.resize(n);
  t.s_select.resize(n);
  t.y_obs.resize(n);
  t.propensity = Eigen::VectorXd::Constant(n, 0.5);
  t.column_names = {"x1", "x2"};
  for (Eigen::Index i = 0; i < n; ++i) {
    t.x(i, 0) = rng.uniform();
    t.x(i, 1) = rng.uniform();
    t.d_treat[i] = rng.uniform() < 0.5 ? 1 : 0;
    t.s_select[i] = rng.uniform() < 0.7 ? 1 : 0;  // independent of (x, d)
    t.y_obs[i] = t.s_select[i] == 1 ? rng.normal() : std::nan("");
  }
  return t;
}

}  // namespace

TEST_CASE("crossfit produces clipped, monotone, out-of-fold predictions") {
  auto table = constant_dgp(600, 21);
  auto folds = data::make_folds(table.n(), 3, 5);
  nuisance::LearnerConfig cfg;
  auto fit = nuisance::crossfit(table, folds, cfg);
  CHECK(fit.s0_hat.minCoeff() >= cfg.eps_s);
  CHECK(fit.s1_hat.maxCoeff() <= 1.0 - cfg.eps_s);
  for (Eigen::Index i = 0; i < table.n(); ++i) {
    for (Eigen::Index g = 1; g < fit.q_grid.cols(); ++g) {
      CHECK(fit.q_grid(i, g) >= fit.q_grid(i, g - 1));
    }
  }
  // constant DGP: the two arms have the same selection probability
  CHECK(std::fabs((fit.s0_hat - fit.s1_hat).mean()) < 0.05);
}

TEST_CASE("cross-fit isolation: fold contents never affect own predictions") {
  auto table = constant_dgp(400, 33);
  auto folds = data::make_folds(table.n(), 2, 9);
  nuisance::LearnerConfig cfg;
  auto base = nuisance::crossfit(table, folds, cfg);

  data::ObservationTable poked = table;
  for (Eigen::Index i = 0; i < table.n(); ++i) {
    if (folds.fold_of[static_cast<std::size_t>(i)] == 0) {
      // mangle outcomes and selection inside fold 0
      if (poked.s_select[i] == 1) poked.y_obs[i] += 37.0;
    }
  }
  auto poked_fit = nuisance::crossfit(poked, folds, cfg);
  for (Eigen::Index i = 0; i < table.n(); ++i) {
    if (folds.fold_of[static_cast<std::size_t>(i)] == 0) {
      // fold-0 predictions come from fold-1 models, which saw no change
      CHECK(poked_fit.s0_hat[i] == base.s0_hat[i]);
      CHECK(poked_fit.q_grid(i, 50) == base.q_grid(i, 50));
    }
  }
}

TEST_CASE("k too large for n is a configuration error") {
  auto table = constant_dgp(40, 2);
  auto folds = data::make_folds(table.n(), 2, 1);
  folds.k = 25;  // force the k <= n/2 check
  folds.fold_of.assign(40, 0);
  for (int i = 0; i < 40; ++i) folds.fold_of[static_cast<std::size_t>(i)] = i % 25;
  nuisance::LearnerConfig cfg;
  CHECK_THROWS_AS(nuisance::crossfit(table, folds, cfg), hb::Error);
}

TEST_CASE("selection mse against the analytic truth decreases when n doubles") {
  roy::RoyConfig rc;
  rc.p = 10;
  rc.seed = 77;
  const double g = rc.gamma();

  auto eval_table = [&](Eigen::Index n, std::uint64_t seed) {
    roy::RoyConfig c = rc;
    c.n = n;
    c.seed = seed;
    return roy::simulate(c);
  };
  auto probe = eval_table(2000, 1234);

  auto mse_logistic = [&](Eigen::Index n) {
    auto train = eval_table(n, 99);
    auto m = learners::LogisticSelection::fit(train.x, train.d_treat, train.s_select);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probe.n(); ++i) {
      for (int d : {0, 1}) {
        double truth = hb::math::norm_cdf(probe.x(i, 0) * g + d);
        double err = m.predict(probe.x.row(i), d) - truth;
        acc += err * err;
      }
    }
    return acc / (2.0 * static_cast<double>(probe.n()));
  };
  CHECK(mse_logistic(10000) < mse_logistic(5000));

  auto mse_forest = [&](Eigen::Index n) {
    auto train = eval_table(n, 99);
    learners::ForestOptions opts;
    opts.trees = 200;
    std::vector<int> rows0, rows1;
    for (Eigen::Index i = 0; i < train.n(); ++i) {
      (train.d_treat[i] == 1 ? rows1 : rows0).push_back(static_cast<int>(i));
    }
    auto sub = [&](const std::vector<int>& rows) {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), train.x.cols());
      Eigen::VectorXd s(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t k = 0; k < rows.size(); ++k) {
        x.row(static_cast<Eigen::Index>(k)) = train.x.row(rows[k]);
        s[static_cast<Eigen::Index>(k)] = train.s_select[rows[k]];
      }
      return std::pair{x, s};
    };
    auto [x0, s0] = sub(rows0);
    auto [x1, s1] = sub(rows1);
    auto f0 = learners::ProbabilityForest::fit(x0, s0, opts);
    auto f1 = learners::ProbabilityForest::fit(x1, s1, opts);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probe.n(); ++i) {
      double e0 = f0.predict(probe.x.row(i)) - hb::math::norm_cdf(probe.x(i, 0) * g);
      double e1 = f1.predict(probe.x.row(i)) - hb::math::norm_cdf(probe.x(i, 0) * g + 1.0);
      acc += e0 * e0 + e1 * e1;
    }
    return acc / (2.0 * static_cast<double>(probe.n()));
  };
  CHECK(mse_forest(10000) < mse_forest(5000));
}

TEST_CASE("crossfit requires both arms and selected-treated units per complement") {
  auto table = constant_dgp(100, 3);
  for (Eigen::Index i = 0; i < table.n(); ++i) {
    table.d_treat[i] = 0;  // no treated units at all
  }
  auto folds = data::make_folds(table.n(), 2, 4);
  nuisance::LearnerConfig cfg;
  CHECK_THROWS_AS(nuisance::crossfit(table, folds, cfg), hb::Error);
}
