#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hetbounds/data.hpp"
#include "hetbounds/forest.hpp"
#include "hetbounds/learners.hpp"

namespace hb::nuisance {

enum class SelectionLearner { kLogistic, kProbabilityForest };
enum class QuantileLearner { kLinear, kQuantileForest };

std::vector<double> default_quantile_grid();  // {0.01, 0.02, ..., 0.99}

struct LearnerConfig {
  SelectionLearner selection = SelectionLearner::kLogistic;
  QuantileLearner quantile = QuantileLearner::kLinear;
  learners::ForestOptions forest;
  double logistic_ridge_scale = 1e-6;
  std::vector<double> grid = default_quantile_grid();
  double eps_s = 0.01;
};

// Cross-fitted out-of-fold nuisance predictions. q_grid rows are monotone
// rearranged (sorted in u) per unit.
struct NuisanceFit {
  Eigen::VectorXd s0_hat;
  Eigen::VectorXd s1_hat;
  Eigen::MatrixXd q_grid;  // n x |grid|
  std::vector<double> grid;
  data::FoldAssignment folds;
  std::string learner_tag;
  int separation_fallbacks = 0;
  int quantile_warnings = 0;
  // fitted-model summaries for diagnostics export
  std::vector<Eigen::VectorXd> selection_coefficients;  // per fold, logistic only
  std::vector<bool> selection_converged;
  int forest_trees = 0;
};

// For each fold f, learners are trained on the complement I_f^c and predict
// the rows of I_f; quantile models see only selected-treated complement rows.
NuisanceFit crossfit(const data::ObservationTable& table, const data::FoldAssignment& folds,
                     const LearnerConfig& config);

}  // namespace hb::nuisance
