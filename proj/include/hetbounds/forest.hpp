#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace hb::learners {

struct ForestOptions {
  int trees = 1000;
  double subsample_fraction = 0.5;
  bool honesty = true;
  double honesty_fraction = 0.5;
  int min_leaf = 5;
  int mtry = 0;  // 0 -> ceil(sqrt(d))
  std::uint64_t seed = 20240901;
};

namespace detail {

struct TreeNode {
  int feature = -1;       // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;             // honest mean (probability forest)
  std::vector<int> honest_rows;   // honest sample rows (quantile forest)
  int honest_count = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;
  double fallback = 0.0;  // tree-wide honest mean for empty honest leaves
  int find_leaf(const Eigen::MatrixXd& x, Eigen::Index row) const;
  int find_leaf_row(const Eigen::RowVectorXd& x) const;
};

}  // namespace detail

// Honest probability forest: tree structure from one half-sample, leaf
// frequencies from the disjoint half, prediction = average of leaf
// frequencies over trees.
class ProbabilityForest {
 public:
  static ProbabilityForest fit(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& target,
                               const ForestOptions& opts);

  double predict(const Eigen::RowVectorXd& x) const;
  Eigen::VectorXd predict_all(const Eigen::MatrixXd& x) const;
  int tree_count() const { return static_cast<int>(trees_.size()); }

 private:
  std::vector<detail::Tree> trees_;
};

// Honest quantile regression forest: forest weights of training point j at
// query x are averaged leaf co-membership indicators; quantiles come from a
// single weighted ecdf, hence are monotone in u by construction.
class QuantileForest {
 public:
  static QuantileForest fit(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                            const ForestOptions& opts);

  // quantiles at all requested levels for one query point; monotone in u
  std::vector<double> predict_quantiles(const Eigen::RowVectorXd& x,
                                        const std::vector<double>& levels) const;
  bool used_global_fallback() const { return fallback_used_; }
  int tree_count() const { return static_cast<int>(trees_.size()); }

 private:
  std::vector<detail::Tree> trees_;
  std::vector<double> y_sorted_;
  std::vector<int> order_;  // train row -> rank in y_sorted_
  mutable bool fallback_used_ = false;
};

}  // namespace hb::learners
