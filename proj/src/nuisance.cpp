#include "hetbounds/nuisance.hpp"

#include <algorithm>
#include <cmath>

#include "hetbounds/error.hpp"

namespace hb::nuisance {

namespace {
const char* kModule = "nuisance_learners";

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

template <typename Vec>
Vec gather(const Vec& v, const std::vector<int>& rows) {
  Vec out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  return out;
}

}  // namespace

std::vector<double> default_quantile_grid() {
  std::vector<double> g(99);
  for (int i = 0; i < 99; ++i) g[static_cast<std::size_t>(i)] = (i + 1) / 100.0;
  return g;
}

NuisanceFit crossfit(const data::ObservationTable& table, const data::FoldAssignment& folds,
                     const LearnerConfig& config) {
  const Eigen::Index n = table.n();
  if (static_cast<Eigen::Index>(folds.fold_of.size()) != n) {
    throw Error(kModule, "fold assignment does not match table size");
  }
  if (2 * static_cast<Eigen::Index>(folds.k) > n) {
    throw Error(kModule, "fold count k=" + std::to_string(folds.k) +
                             " too large for n=" + std::to_string(n) + " (need k <= n/2)");
  }
  for (std::size_t g = 1; g < config.grid.size(); ++g) {
    if (!(config.grid[g] > config.grid[g - 1]) || config.grid[g] <= 0.0 ||
        config.grid[g] >= 1.0) {
      throw Error(kModule, "quantile grid must be strictly increasing inside (0,1)");
    }
  }
  const auto gsize = static_cast<Eigen::Index>(config.grid.size());

  NuisanceFit fit;
  fit.s0_hat.resize(n);
  fit.s1_hat.resize(n);
  fit.q_grid.resize(n, gsize);
  fit.grid = config.grid;
  fit.folds = folds;
  fit.learner_tag =
      std::string(config.selection == SelectionLearner::kLogistic ? "logistic" : "prob_forest") +
      "+" + (config.quantile == QuantileLearner::kLinear ? "linear_quantile" : "quantile_forest");

  auto by_fold = folds.fold_indices();
  for (int f = 0; f < folds.k; ++f) {
    const auto& fold_rows = by_fold[static_cast<std::size_t>(f)];
    if (fold_rows.empty()) continue;
    auto train_rows = folds.complement_of(f);

    std::vector<int> train_t, train_c, train_sel_treated;
    for (int r : train_rows) {
      if (table.d_treat[r] == 1) {
        train_t.push_back(r);
        if (table.s_select[r] == 1) train_sel_treated.push_back(r);
      } else {
        train_c.push_back(r);
      }
    }
    if (train_t.empty() || train_c.empty()) {
      throw Error(kModule, "training complement of fold " + std::to_string(f) +
                               " lacks a treatment arm");
    }
    if (train_sel_treated.empty()) {
      throw Error(kModule, "training complement of fold " + std::to_string(f) +
                               " has no selected-treated units");
    }

    Eigen::MatrixXd x_fold = gather_rows(table.x, fold_rows);

    Eigen::VectorXd s0_pred, s1_pred;
    if (config.selection == SelectionLearner::kLogistic) {
      Eigen::MatrixXd x_train = gather_rows(table.x, train_rows);
      Eigen::VectorXi d_train = gather(table.d_treat, train_rows);
      Eigen::VectorXi s_train = gather(table.s_select, train_rows);
      auto model = learners::LogisticSelection::fit(x_train, d_train, s_train,
                                                    config.logistic_ridge_scale);
      if (model.separation_fallback()) ++fit.separation_fallbacks;
      fit.selection_coefficients.push_back(model.coefficients());
      fit.selection_converged.push_back(model.converged());
      s0_pred = model.predict_all(x_fold, 0);
      s1_pred = model.predict_all(x_fold, 1);
    } else {
      // one probability forest per arm, target = selection indicator
      learners::ForestOptions opts = config.forest;
      opts.seed = config.forest.seed ^ (0x51ecULL + static_cast<std::uint64_t>(f) * 2654435761ULL);
      Eigen::MatrixXd x0 = gather_rows(table.x, train_c);
      Eigen::VectorXd s0 = gather(table.s_select, train_c).cast<double>();
      auto forest0 = learners::ProbabilityForest::fit(x0, s0, opts);
      opts.seed ^= 0xa11ce;
      Eigen::MatrixXd x1 = gather_rows(table.x, train_t);
      Eigen::VectorXd s1v = gather(table.s_select, train_t).cast<double>();
      auto forest1 = learners::ProbabilityForest::fit(x1, s1v, opts);
      fit.forest_trees = forest0.tree_count();
      s0_pred = forest0.predict_all(x_fold);
      s1_pred = forest1.predict_all(x_fold);
    }
    for (std::size_t i = 0; i < fold_rows.size(); ++i) {
      const int r = fold_rows[i];
      fit.s0_hat[r] = std::clamp(s0_pred[static_cast<Eigen::Index>(i)], config.eps_s, 1.0 - config.eps_s);
      fit.s1_hat[r] = std::clamp(s1_pred[static_cast<Eigen::Index>(i)], config.eps_s, 1.0 - config.eps_s);
    }

    Eigen::MatrixXd x_q = gather_rows(table.x, train_sel_treated);
    Eigen::VectorXd y_q = gather(table.y_obs, train_sel_treated);
    if (config.quantile == QuantileLearner::kLinear) {
      Eigen::VectorXd warm;
      for (Eigen::Index g = 0; g < gsize; ++g) {
        auto model = learners::LinearQuantile::fit(x_q, y_q, config.grid[static_cast<std::size_t>(g)], warm);
        if (model.underdetermined()) ++fit.quantile_warnings;
        warm = model.coefficients();
        Eigen::VectorXd pred = model.predict_all(x_fold);
        for (std::size_t i = 0; i < fold_rows.size(); ++i) {
          fit.q_grid(fold_rows[i], g) = pred[static_cast<Eigen::Index>(i)];
        }
      }
    } else {
      learners::ForestOptions opts = config.forest;
      opts.seed = config.forest.seed ^ (0x9f0aULL + static_cast<std::uint64_t>(f) * 0x9e3779b9ULL);
      auto qforest = learners::QuantileForest::fit(x_q, y_q, opts);
      for (std::size_t i = 0; i < fold_rows.size(); ++i) {
        auto qs = qforest.predict_quantiles(x_fold.row(static_cast<Eigen::Index>(i)), config.grid);
        for (Eigen::Index g = 0; g < gsize; ++g) {
          fit.q_grid(fold_rows[i], g) = qs[static_cast<std::size_t>(g)];
        }
      }
      if (qforest.used_global_fallback()) ++fit.quantile_warnings;
    }
  }

  // monotone rearrangement repairs crossings from independent per-level fits
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> row(static_cast<std::size_t>(gsize));
    for (Eigen::Index g = 0; g < gsize; ++g) row[static_cast<std::size_t>(g)] = fit.q_grid(i, g);
    std::sort(row.begin(), row.end());
    for (Eigen::Index g = 0; g < gsize; ++g) fit.q_grid(i, g) = row[static_cast<std::size_t>(g)];
  }
  return fit;
}

}  // namespace hb::nuisance
