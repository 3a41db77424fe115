#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aqcal/preprocess.hpp"

namespace aqcal::gbdt {

// Boosting knobs. Defaults follow the usual gbtree defaults; tuned() is the
// configuration found best for the calibration task (eta 0.16, 500 rounds).
struct Hyperparams {
  double eta = 0.3;
  int n_rounds = 100;
  int max_depth = 6;  // edges from the root; 0 = a single leaf
  double subsample = 1.0;
  double colsample_bytree = 1.0;
  // Minimum hessian sum per child. For squared loss h = 1, so this is a
  // minimum row count per leaf.
  double min_child_weight = 1.0;
  double lambda = 1.0;
  double gamma = 0.0;
  double alpha = 0.0;  // L1, linear booster only
  std::uint64_t seed = 0;
  std::optional<int> early_stopping_rounds;

  static Hyperparams tuned() {
    Hyperparams p;
    p.eta = 0.16;
    p.n_rounds = 500;
    return p;
  }

  // Throws kInvalidArgument naming the first violated range.
  void validate() const;

  bool operator==(const Hyperparams&) const = default;
};

// Worker count for feature evaluation inside one node. Results do not depend
// on it.
struct ExecOptions {
  int num_threads = 1;
};

struct GradHess {
  double g = 0.0;
  double h = 0.0;
};

// Derivatives of 0.5 * (pred - target)^2 with respect to pred.
GradHess grad_hess(double pred, double target);

// -G / (H + lambda), or 0 when the denominator is 0.
double leaf_weight(double sum_grad, double sum_hess, double lambda);

// 0.5 * [GL^2/(HL+l) + GR^2/(HR+l) - (GL+GR)^2/(HL+HR+l)] - gamma; a term
// whose denominator is 0 contributes 0.
double split_gain(double grad_left, double hess_left, double grad_right, double hess_right,
                  double lambda, double gamma);

struct NodeStats {
  double sum_grad = 0.0;
  double sum_hess = 0.0;
};

struct SplitSpec {
  std::size_t feature_index = 0;
  double threshold = 0.0;
  double gain = 0.0;
  NodeStats left;
  NodeStats right;
};

// Column-major feature storage: columns[j][row].
using Columns = std::vector<std::vector<double>>;

Columns to_columns(const FeatureMatrix& m);

// Exact greedy search over every allowed feature. Candidate thresholds are
// midpoints between distinct consecutive values; both children must reach
// min_child_weight. Returns the highest-gain split with gain > 0; ties go to
// the lower feature index, then the lower threshold.
std::optional<SplitSpec> find_best_split(std::span<const std::size_t> rows,
                                         const Columns& columns,
                                         std::span<const GradHess> grad,
                                         const Hyperparams& params,
                                         std::span<const std::size_t> allowed_features,
                                         const ExecOptions& exec = {});

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double weight = 0.0;  // leaves only, already scaled by eta

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  // Routes left iff value < threshold. `value(j)` returns feature j.
  template <typename FeatureFn>
  double evaluate(FeatureFn&& value) const {
    std::size_t id = 0;
    while (!nodes[id].is_leaf()) {
      const TreeNode& n = nodes[id];
      id = static_cast<std::size_t>(value(static_cast<std::size_t>(n.feature)) < n.threshold
                                        ? n.left
                                        : n.right);
    }
    return nodes[id].weight;
  }

  double predict(std::span<const double> row) const {
    return evaluate([&](std::size_t j) { return row[j]; });
  }

  std::size_t depth() const;
  std::size_t num_leaves() const;
  double max_abs_leaf() const;

  // Throws kIntegrity on dangling/shared child ids, cycles, unreachable
  // nodes or a feature index >= num_features.
  void validate(std::size_t num_features) const;

  bool operator==(const RegressionTree&) const = default;
};

// Depth-wise growth. A node is a leaf at depth == max_depth, when its
// hessian sum is below 2 * min_child_weight, or when no split has positive
// gain. `rows` must be ascending.
RegressionTree grow_tree(std::span<const std::size_t> rows, const Columns& columns,
                         std::span<const GradHess> grad, const Hyperparams& params,
                         std::span<const std::size_t> features, const ExecOptions& exec = {});

struct Ensemble {
  double base_score = 0.0;
  std::vector<RegressionTree> trees;
  std::vector<std::string> feature_names;
  TargetMode target_mode = TargetMode::kOffset;

  bool operator==(const Ensemble&) const = default;
};

struct TrainReport {
  std::vector<double> train_rmse;
  std::vector<double> val_rmse;  // empty when there is no validation set
  std::optional<std::size_t> best_iteration;

  std::size_t rounds() const { return train_rmse.size(); }
};

struct TrainResult {
  Ensemble model;
  TrainReport report;
};

// base_score is the mean training label. Each round draws a row subsample
// and then a feature subsample from SplitMix64 seeded with
// derive_seed(seed, tree index), grows a tree on the
// current gradients and updates cached predictions for every row. With
// early_stopping_rounds set, boosting stops once validation RMSE has not
// improved for that many rounds and the ensemble is cut back to
// best_iteration.
TrainResult train(const FeatureMatrix& matrix, const DataSplit& split, const Hyperparams& params,
                  const ExecOptions& exec = {});

// Warm start: predictions start from `model` evaluated on `matrix`, then
// `extra_rounds` rounds proceed as in train and the new trees are appended.
// base_score is kept. params.n_rounds is ignored.
TrainResult continue_training(const Ensemble& model, const FeatureMatrix& matrix,
                              const DataSplit& split, int extra_rounds,
                              const Hyperparams& params, const ExecOptions& exec = {});

// Throws kSchema on width mismatch, kInvalidArgument on non-finite values.
double predict_row(const Ensemble& model, std::span<const double> row);

// Throws kSchema if feature names differ from the model's.
std::vector<double> predict(const Ensemble& model, const FeatureMatrix& matrix);

}  // namespace aqcal::gbdt
