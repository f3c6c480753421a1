#pragma once

/**
 * @file gbdt.hpp
 * @brief Gradient-boosted regression trees, squared-error loss.
 *
 * Axis-aligned trees with constant leaves fit to stagewise residuals.
 * Split search is an exhaustive scan over midpoints of consecutive sorted
 * unique feature values, minimizing the summed child squared error; ties
 * break toward the lowest feature index, then the lowest threshold. Stage m
 * subsamples rows from a sub-stream derived from (rng_seed, m), so
 * truncating an ensemble never changes the trees that remain.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sahanet/matrix.hpp"
#include "sahanet/rng.hpp"

namespace sahanet::gbdt {

struct GbdtHyperparams {
  int n_estimators = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_samples_leaf = 1;
  double subsample = 1.0;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (n_estimators < 1)
      throw std::invalid_argument("gbdt: n_estimators must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
      throw std::invalid_argument("gbdt: learning_rate must be in (0,1]");
    if (max_depth < 1) throw std::invalid_argument("gbdt: max_depth must be >= 1");
    if (min_samples_leaf < 1)
      throw std::invalid_argument("gbdt: min_samples_leaf must be >= 1");
    if (!(subsample > 0.0 && subsample <= 1.0))
      throw std::invalid_argument("gbdt: subsample must be in (0,1]");
  }
};

struct TreeNode {
  int feature = -1;    ///< -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;  ///< leaf estimate, residual units
  int left = -1;       ///< absolute node index
  int right = -1;
  int n_samples = 0;   ///< in-bag rows that reached this node
};

/// Additive tree ensemble: prediction = base_value + learning_rate * sum of
/// leaf values along the tree sequence. Trees are stored flat; tree m owns
/// nodes [tree_offsets[m], tree_offsets[m+1]) and its root sits at
/// tree_offsets[m].
struct GradientBoostedEnsemble {
  double base_value = 0.0;
  double learning_rate = 0.1;
  std::size_t n_features = 0;
  std::vector<TreeNode> nodes;
  std::vector<std::size_t> tree_offsets = {0};

  std::size_t n_trees() const { return tree_offsets.size() - 1; }

  double tree_value(std::size_t m, const double* row) const {
    std::size_t i = tree_offsets[m];
    while (nodes[i].feature >= 0)
      i = (row[nodes[i].feature] <= nodes[i].threshold)
              ? static_cast<std::size_t>(nodes[i].left)
              : static_cast<std::size_t>(nodes[i].right);
    return nodes[i].value;
  }

  double predict_row(const double* row) const {
    double out = base_value;
    for (std::size_t m = 0; m < n_trees(); ++m)
      out += learning_rate * tree_value(m, row);
    return out;
  }

  std::vector<double> predict(const Matrix& x) const {
    check_shape(x);
    std::vector<double> out(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) out[r] = predict_row(x.row(r));
    return out;
  }

  /// Cumulative predictions: element m uses the first m trees, so element 0
  /// is the base value everywhere and the last element equals predict().
  std::vector<std::vector<double>> staged_predict(const Matrix& x) const {
    check_shape(x);
    std::vector<std::vector<double>> stages(n_trees() + 1);
    stages[0].assign(x.rows, base_value);
    for (std::size_t m = 0; m < n_trees(); ++m) {
      stages[m + 1] = stages[m];
      for (std::size_t r = 0; r < x.rows; ++r)
        stages[m + 1][r] += learning_rate * tree_value(m, x.row(r));
    }
    return stages;
  }

  /// Keeps the first m trees.
  GradientBoostedEnsemble truncate(std::size_t m) const {
    if (m > n_trees())
      throw std::out_of_range("gbdt: truncation beyond ensemble size");
    GradientBoostedEnsemble out;
    out.base_value = base_value;
    out.learning_rate = learning_rate;
    out.n_features = n_features;
    out.tree_offsets.assign(tree_offsets.begin(),
                            tree_offsets.begin() + static_cast<long>(m) + 1);
    out.nodes.assign(nodes.begin(),
                     nodes.begin() + static_cast<long>(tree_offsets[m]));
    return out;
  }

 private:
  void check_shape(const Matrix& x) const {
    if (x.cols != n_features)
      throw std::invalid_argument("gbdt: feature count mismatch");
  }
};

namespace detail {

inline constexpr std::uint64_t kStageStream = 0x67626474;  // per-stage RNG tag

/// Scratch state for fitting trees against one fixed feature matrix.
/// Columns are presorted once; each level of each tree is then a single
/// filtered pass per feature over the sorted order.
class TreeFitter {
 public:
  TreeFitter(const Matrix& x, int max_depth, int min_samples_leaf)
      : x_(x),
        n_(x.rows),
        f_(x.cols),
        max_depth_(max_depth),
        min_leaf_(min_samples_leaf),
        sorted_(x.rows * x.cols),
        node_of_row_(x.rows) {
    std::vector<int> order(n_);
    for (std::size_t c = 0; c < f_; ++c) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double va = x_.at(static_cast<std::size_t>(a), c);
        const double vb = x_.at(static_cast<std::size_t>(b), c);
        return va < vb || (va == vb && a < b);
      });
      std::copy(order.begin(), order.end(), sorted_.begin() + c * n_);
    }
  }

  /// Appends one tree fitted to `residual` over `in_bag` rows.
  void build(const std::vector<double>& residual,
             const std::vector<int>& in_bag, std::vector<TreeNode>& nodes) {
    const int base = static_cast<int>(nodes.size());
    std::fill(node_of_row_.begin(), node_of_row_.end(), -1);

    // Tree-local node stats, indexed by (node id - base).
    stat_n_.assign(1, 0);
    stat_sum_.assign(1, 0.0);
    stat_min_.assign(1, std::numeric_limits<double>::infinity());
    stat_max_.assign(1, -std::numeric_limits<double>::infinity());
    nodes.push_back(TreeNode{});
    for (int r : in_bag) {
      node_of_row_[static_cast<std::size_t>(r)] = 0;
      bump_stats(0, residual[static_cast<std::size_t>(r)]);
    }

    std::vector<int> open = {0};
    for (int depth = 0; depth < max_depth_ && !open.empty(); ++depth) {
      // Nodes eligible for a split at this level.
      splittable_.assign(stat_n_.size(), 0);
      std::vector<int> active;
      for (int u : open) {
        const std::size_t su = static_cast<std::size_t>(u);
        if (stat_n_[su] >= 2 * min_leaf_ && stat_min_[su] < stat_max_[su]) {
          splittable_[su] = 1;
          active.push_back(u);
        }
      }
      if (active.empty()) break;

      best_gain_.assign(stat_n_.size(),
                        -std::numeric_limits<double>::infinity());
      best_feature_.assign(stat_n_.size(), -1);
      best_thr_.assign(stat_n_.size(), 0.0);
      scan_n_.assign(stat_n_.size(), 0);
      scan_sum_.assign(stat_n_.size(), 0.0);
      scan_prev_.assign(stat_n_.size(), 0.0);
      scan_has_prev_.assign(stat_n_.size(), 0);

      for (std::size_t c = 0; c < f_; ++c) {
        for (int u : active) {
          const std::size_t su = static_cast<std::size_t>(u);
          scan_n_[su] = 0;
          scan_sum_[su] = 0.0;
          scan_has_prev_[su] = 0;
        }
        const int* order = sorted_.data() + c * n_;
        for (std::size_t k = 0; k < n_; ++k) {
          const int row = order[k];
          const int u = node_of_row_[static_cast<std::size_t>(row)];
          if (u < 0 || !splittable_[static_cast<std::size_t>(u)]) continue;
          const std::size_t su = static_cast<std::size_t>(u);
          const double v = x_.at(static_cast<std::size_t>(row), c);
          if (scan_has_prev_[su] && v > scan_prev_[su] &&
              scan_n_[su] >= min_leaf_ &&
              stat_n_[su] - scan_n_[su] >= min_leaf_) {
            double thr = scan_prev_[su] + 0.5 * (v - scan_prev_[su]);
            if (thr >= v) thr = scan_prev_[su];
            const double ln = static_cast<double>(scan_n_[su]);
            const double rn = static_cast<double>(stat_n_[su] - scan_n_[su]);
            const double rs = stat_sum_[su] - scan_sum_[su];
            const double gain =
                scan_sum_[su] * scan_sum_[su] / ln + rs * rs / rn;
            // Candidates whose gains agree to within rounding are ties;
            // the first one scanned (lowest feature, lowest threshold)
            // stays. Equal partitions reached through different features
            // otherwise pick a winner by summation order alone.
            const double margin =
                1e-12 * std::max(std::fabs(gain), std::fabs(best_gain_[su]));
            if (best_feature_[su] < 0 || gain > best_gain_[su] + margin) {
              best_gain_[su] = gain;
              best_feature_[su] = static_cast<int>(c);
              best_thr_[su] = thr;
            }
          }
          scan_n_[su] += 1;
          scan_sum_[su] += residual[static_cast<std::size_t>(row)];
          scan_prev_[su] = v;
          scan_has_prev_[su] = 1;
        }
      }

      // Materialize this level's splits.
      std::vector<int> next_open;
      bool any_split = false;
      for (int u : active) {
        const std::size_t su = static_cast<std::size_t>(u);
        if (best_feature_[su] < 0) continue;  // no legal cut; stays a leaf
        any_split = true;
        const int left = static_cast<int>(stat_n_.size());
        const int right = left + 1;
        TreeNode& node = nodes[static_cast<std::size_t>(base + u)];
        node.feature = best_feature_[su];
        node.threshold = best_thr_[su];
        node.left = base + left;
        node.right = base + right;
        split_left_.resize(stat_n_.size());
        split_left_[su] = left;
        for (int child = 0; child < 2; ++child) {
          nodes.push_back(TreeNode{});
          stat_n_.push_back(0);
          stat_sum_.push_back(0.0);
          stat_min_.push_back(std::numeric_limits<double>::infinity());
          stat_max_.push_back(-std::numeric_limits<double>::infinity());
        }
        next_open.push_back(left);
        next_open.push_back(right);
      }
      if (!any_split) break;

      // Route in-bag rows of split nodes to their children.
      for (int r : in_bag) {
        const std::size_t sr = static_cast<std::size_t>(r);
        const int u = node_of_row_[sr];
        const std::size_t su = static_cast<std::size_t>(u);
        if (!splittable_[su] ||
            nodes[static_cast<std::size_t>(base + u)].feature < 0)
          continue;
        const TreeNode& node = nodes[static_cast<std::size_t>(base + u)];
        const int child =
            (x_.at(sr, static_cast<std::size_t>(node.feature)) <=
             node.threshold)
                ? split_left_[su]
                : split_left_[su] + 1;
        node_of_row_[sr] = child;
        bump_stats(child, residual[sr]);
      }
      open = std::move(next_open);
    }

    // Leaf values: mean in-bag residual of the node.
    for (std::size_t u = 0; u < stat_n_.size(); ++u) {
      TreeNode& node = nodes[static_cast<std::size_t>(base) + u];
      node.n_samples = stat_n_[u];
      if (node.feature < 0)
        node.value = stat_sum_[u] / static_cast<double>(stat_n_[u]);
    }
  }

 private:
  void bump_stats(int u, double r) {
    const std::size_t su = static_cast<std::size_t>(u);
    stat_n_[su] += 1;
    stat_sum_[su] += r;
    stat_min_[su] = std::min(stat_min_[su], r);
    stat_max_[su] = std::max(stat_max_[su], r);
  }

  const Matrix& x_;
  std::size_t n_, f_;
  int max_depth_, min_leaf_;
  std::vector<int> sorted_;
  std::vector<int> node_of_row_;

  std::vector<int> stat_n_;
  std::vector<double> stat_sum_, stat_min_, stat_max_;
  std::vector<char> splittable_;
  std::vector<double> best_gain_, best_thr_;
  std::vector<int> best_feature_;
  std::vector<int> scan_n_;
  std::vector<double> scan_sum_, scan_prev_;
  std::vector<char> scan_has_prev_;
  std::vector<int> split_left_;
};

inline void check_training_data(const Matrix& x, const std::vector<double>& y) {
  if (x.rows == 0 || y.empty())
    throw std::invalid_argument("gbdt: empty training data");
  if (x.rows != y.size())
    throw std::invalid_argument("gbdt: row/target count mismatch");
  if (x.cols == 0) throw std::invalid_argument("gbdt: no features");
  for (double v : x.values)
    if (!std::isfinite(v))
      throw std::invalid_argument("gbdt: non-finite value in features");
  for (double v : y)
    if (!std::isfinite(v))
      throw std::invalid_argument("gbdt: non-finite value in targets");
}

}  // namespace detail

struct EarlyStopFit {
  GradientBoostedEnsemble model;  ///< all scanned stages
  std::size_t best_stage = 0;     ///< validation-MSE argmin; ties -> fewer trees
  double best_mse = 0.0;
  std::size_t stages_scanned = 0;
};

/// Core boosting loop. With a validation set and patience > 0, the scan
/// stops once the validation MSE has not improved for `patience`
/// consecutive stages.
inline EarlyStopFit fit_with_validation(const Matrix& x,
                                        const std::vector<double>& y,
                                        const Matrix* x_val,
                                        const std::vector<double>* y_val,
                                        const GbdtHyperparams& hp,
                                        int patience) {
  hp.validate();
  detail::check_training_data(x, y);
  const bool has_val = x_val != nullptr && y_val != nullptr;
  if (has_val) {
    detail::check_training_data(*x_val, *y_val);
    if (x_val->cols != x.cols)
      throw std::invalid_argument("gbdt: validation feature count mismatch");
  }

  const std::size_t n = x.rows;
  EarlyStopFit out;
  GradientBoostedEnsemble& model = out.model;
  model.learning_rate = hp.learning_rate;
  model.n_features = x.cols;
  model.base_value =
      std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  std::vector<double> pred(n, model.base_value);
  std::vector<double> residual(n);
  std::vector<double> val_pred;
  auto val_mse = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < val_pred.size(); ++i) {
      const double d = val_pred[i] - (*y_val)[i];
      s += d * d;
    }
    return s / static_cast<double>(val_pred.size());
  };
  if (has_val) {
    val_pred.assign(y_val->size(), model.base_value);
    out.best_mse = val_mse();
    out.best_stage = 0;
  }

  detail::TreeFitter fitter(x, hp.max_depth, hp.min_samples_leaf);
  const std::size_t bag_size = std::min<std::size_t>(
      n, static_cast<std::size_t>(
             std::ceil(hp.subsample * static_cast<double>(n))));
  std::vector<int> in_bag(n);
  std::iota(in_bag.begin(), in_bag.end(), 0);
  std::vector<int> perm;

  int stages_without_improvement = 0;
  for (int m = 0; m < hp.n_estimators; ++m) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - pred[i];

    if (bag_size < n) {
      // Partial Fisher-Yates off the stage's own sub-stream (so truncation
      // cannot disturb earlier trees).
      Rng stage_rng(derive_seed(hp.rng_seed, detail::kStageStream,
                                static_cast<std::uint64_t>(m)));
      perm.resize(n);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = 0; i < bag_size; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(
                                      stage_rng.below(n - i));
        std::swap(perm[i], perm[j]);
      }
      in_bag.assign(perm.begin(), perm.begin() + static_cast<long>(bag_size));
    }

    fitter.build(residual, in_bag, model.nodes);
    model.tree_offsets.push_back(model.nodes.size());

    const std::size_t stage = model.n_trees() - 1;
    for (std::size_t r = 0; r < n; ++r)
      pred[r] += hp.learning_rate * model.tree_value(stage, x.row(r));

    if (has_val) {
      for (std::size_t r = 0; r < x_val->rows; ++r)
        val_pred[r] += hp.learning_rate * model.tree_value(stage, x_val->row(r));
      const double mse = val_mse();
      if (mse < out.best_mse) {
        out.best_mse = mse;
        out.best_stage = stage + 1;
        stages_without_improvement = 0;
      } else {
        ++stages_without_improvement;
      }
      if (patience > 0 && stages_without_improvement >= patience) break;
    }
  }
  out.stages_scanned = model.n_trees();
  return out;
}

inline GradientBoostedEnsemble fit(const Matrix& x,
                                   const std::vector<double>& y,
                                   const GbdtHyperparams& hp) {
  return fit_with_validation(x, y, nullptr, nullptr, hp, 0).model;
}

}  // namespace sahanet::gbdt
