#include "hetbounds/forest.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "hetbounds/error.hpp"
#include "hetbounds/math.hpp"

namespace hb::learners {

namespace detail {

int Tree::find_leaf(const Eigen::MatrixXd& x, Eigen::Index row) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& nd = nodes[static_cast<std::size_t>(node)];
    node = x(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return node;
}

int Tree::find_leaf_row(const Eigen::RowVectorXd& x) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& nd = nodes[static_cast<std::size_t>(node)];
    node = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return node;
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best SSE-reducing axis split over a random feature subset.
SplitChoice best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const std::vector<int>& rows, int mtry, int min_leaf,
                       hb::math::Rng& rng) {
  SplitChoice best;
  const int d = static_cast<int>(x.cols());
  const auto m = static_cast<int>(rows.size());
  if (m < 2 * min_leaf) return best;
  std::vector<int> feats(static_cast<std::size_t>(d));
  std::iota(feats.begin(), feats.end(), 0);
  hb::math::shuffle(feats, rng);
  const int tried = std::min(mtry, d);

  double sum_all = 0.0;
  for (int r : rows) sum_all += y[r];

  std::vector<std::pair<double, int>> vals(static_cast<std::size_t>(m));
  for (int f = 0; f < tried; ++f) {
    const int feat = feats[static_cast<std::size_t>(f)];
    for (int i = 0; i < m; ++i) {
      vals[static_cast<std::size_t>(i)] = {x(rows[static_cast<std::size_t>(i)], feat),
                                           rows[static_cast<std::size_t>(i)]};
    }
    std::sort(vals.begin(), vals.end());
    double sum_left = 0.0;
    for (int i = 0; i < m - 1; ++i) {
      sum_left += y[vals[static_cast<std::size_t>(i)].second];
      const int nl = i + 1;
      const int nr = m - nl;
      if (nl < min_leaf) continue;
      if (nr < min_leaf) break;
      if (vals[static_cast<std::size_t>(i)].first ==
          vals[static_cast<std::size_t>(i + 1)].first) {
        continue;  // cannot split between equal values
      }
      double sum_right = sum_all - sum_left;
      // SSE reduction up to constants: sum_l^2/n_l + sum_r^2/n_r
      double gain = sum_left * sum_left / nl + sum_right * sum_right / nr;
      if (gain > best.gain + 1e-12 || best.feature < 0) {
        if (gain > best.gain || best.feature < 0) {
          best.feature = feat;
          best.threshold = 0.5 * (vals[static_cast<std::size_t>(i)].first +
                                  vals[static_cast<std::size_t>(i + 1)].first);
          best.gain = gain;
        }
      }
    }
  }
  // require an actual improvement over the unsplit node
  if (best.feature >= 0) {
    double base = sum_all * sum_all / m;
    if (best.gain <= base + 1e-12) best.feature = -1;
  }
  return best;
}

Tree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               const std::vector<int>& structure_rows, const std::vector<int>& honest_rows,
               const ForestOptions& opts, bool keep_rows, hb::math::Rng& rng) {
  Tree tree;
  const int mtry = opts.mtry > 0
                       ? opts.mtry
                       : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));
  struct Work {
    int node;
    std::vector<int> rows;
  };
  tree.nodes.emplace_back();
  std::vector<Work> stack;
  stack.push_back({0, structure_rows});
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    SplitChoice split = best_split(x, y, w.rows, mtry, opts.min_leaf, rng);
    if (split.feature < 0) continue;  // stays a leaf
    std::vector<int> left_rows, right_rows;
    left_rows.reserve(w.rows.size());
    right_rows.reserve(w.rows.size());
    for (int r : w.rows) {
      (x(r, split.feature) <= split.threshold ? left_rows : right_rows).push_back(r);
    }
    const int left = static_cast<int>(tree.nodes.size());
    const int right = left + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[static_cast<std::size_t>(w.node)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    stack.push_back({left, std::move(left_rows)});
    stack.push_back({right, std::move(right_rows)});
  }
  // honest fill
  double total = 0.0;
  for (int r : honest_rows) {
    int leaf = tree.find_leaf(x, r);
    auto& nd = tree.nodes[static_cast<std::size_t>(leaf)];
    nd.value += y[r];
    nd.honest_count += 1;
    if (keep_rows) nd.honest_rows.push_back(r);
    total += y[r];
  }
  tree.fallback = honest_rows.empty() ? 0.0 : total / static_cast<double>(honest_rows.size());
  for (auto& nd : tree.nodes) {
    if (nd.feature < 0) {
      nd.value = nd.honest_count > 0 ? nd.value / nd.honest_count : tree.fallback;
    }
  }
  return tree;
}

void draw_samples(Eigen::Index n, const ForestOptions& opts, hb::math::Rng& rng,
                  std::vector<int>& structure, std::vector<int>& honest) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  hb::math::shuffle(idx, rng);
  auto take = static_cast<std::size_t>(
      std::max<Eigen::Index>(2, static_cast<Eigen::Index>(opts.subsample_fraction * n)));
  take = std::min(take, idx.size());
  if (opts.honesty) {
    auto cut = static_cast<std::size_t>(opts.honesty_fraction * take);
    cut = std::max<std::size_t>(1, std::min(cut, take - 1));
    structure.assign(idx.begin(), idx.begin() + static_cast<long>(cut));
    honest.assign(idx.begin() + static_cast<long>(cut), idx.begin() + static_cast<long>(take));
  } else {
    structure.assign(idx.begin(), idx.begin() + static_cast<long>(take));
    honest = structure;
  }
}

}  // namespace
}  // namespace detail

ProbabilityForest ProbabilityForest::fit(const Eigen::MatrixXd& x_train,
                                         const Eigen::VectorXd& target,
                                         const ForestOptions& opts) {
  const Eigen::Index n = x_train.rows();
  if (n < 2 * opts.min_leaf) {
    throw Error("nuisance_learners",
                "probability forest needs at least 2*min_leaf training rows");
  }
  ProbabilityForest out;
  out.trees_.resize(static_cast<std::size_t>(opts.trees));
  for (int b = 0; b < opts.trees; ++b) {
    hb::math::Rng rng(opts.seed, static_cast<std::uint64_t>(b));
    std::vector<int> structure, honest;
    detail::draw_samples(n, opts, rng, structure, honest);
    out.trees_[static_cast<std::size_t>(b)] =
        detail::grow_tree(x_train, target, structure, honest, opts, /*keep_rows=*/false, rng);
  }
  return out;
}

double ProbabilityForest::predict(const Eigen::RowVectorXd& x) const {
  double acc = 0.0;
  for (const auto& t : trees_) {
    acc += t.nodes[static_cast<std::size_t>(t.find_leaf_row(x))].value;
  }
  return acc / static_cast<double>(trees_.size());
}

Eigen::VectorXd ProbabilityForest::predict_all(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double acc = 0.0;
    for (const auto& t : trees_) {
      acc += t.nodes[static_cast<std::size_t>(t.find_leaf(x, i))].value;
    }
    out[i] = acc / static_cast<double>(trees_.size());
  }
  return out;
}

QuantileForest QuantileForest::fit(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                                   const ForestOptions& opts) {
  const Eigen::Index n = x_train.rows();
  if (n < 2 * opts.min_leaf) {
    throw Error("nuisance_learners", "quantile forest needs at least 2*min_leaf training rows");
  }
  QuantileForest out;
  out.trees_.resize(static_cast<std::size_t>(opts.trees));
  for (int b = 0; b < opts.trees; ++b) {
    hb::math::Rng rng(opts.seed ^ 0x9cf1a23bULL, static_cast<std::uint64_t>(b));
    std::vector<int> structure, honest;
    detail::draw_samples(n, opts, rng, structure, honest);
    out.trees_[static_cast<std::size_t>(b)] =
        detail::grow_tree(x_train, y_train, structure, honest, opts, /*keep_rows=*/true, rng);
  }
  std::vector<std::pair<double, int>> pairs(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) pairs[static_cast<std::size_t>(i)] = {y_train[i], static_cast<int>(i)};
  std::sort(pairs.begin(), pairs.end());
  out.y_sorted_.resize(static_cast<std::size_t>(n));
  out.order_.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    out.y_sorted_[r] = pairs[r].first;
    out.order_[static_cast<std::size_t>(pairs[r].second)] = static_cast<int>(r);
  }
  return out;
}

std::vector<double> QuantileForest::predict_quantiles(const Eigen::RowVectorXd& x,
                                                      const std::vector<double>& levels) const {
  std::vector<double> weight(y_sorted_.size(), 0.0);
  double total = 0.0;
  for (const auto& t : trees_) {
    const auto& nd = t.nodes[static_cast<std::size_t>(t.find_leaf_row(x))];
    if (nd.honest_count == 0) continue;
    double w = 1.0 / static_cast<double>(nd.honest_count);
    for (int r : nd.honest_rows) {
      weight[static_cast<std::size_t>(order_[static_cast<std::size_t>(r)])] += w;
      total += w;
    }
  }
  std::vector<double> out(levels.size());
  if (total <= 0.0) {
    if (!fallback_used_) {
      std::cerr << "[nuisance_learners] warning: quantile forest produced empty "
                   "weights, falling back to global empirical quantiles\n";
    }
    fallback_used_ = true;
    for (std::size_t k = 0; k < levels.size(); ++k) {
      out[k] = hb::math::empirical_quantile_sorted(y_sorted_, levels[k]);
    }
    return out;
  }
  // single weighted ecdf: q(u) = smallest y with cumulative weight >= u*total
  std::size_t pos = 0;
  double cum = weight.empty() ? 0.0 : weight[0];
  for (std::size_t k = 0; k < levels.size(); ++k) {
    double target = levels[k] * total;
    while (cum + 1e-12 < target && pos + 1 < weight.size()) {
      ++pos;
      cum += weight[pos];
    }
    out[k] = y_sorted_[pos];
  }
  return out;
}

}  // namespace hb::learners
