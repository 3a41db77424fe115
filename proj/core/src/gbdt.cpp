#include "aqcal/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <thread>

#include "aqcal/error.hpp"
#include "aqcal/rng.hpp"

namespace aqcal::gbdt {
namespace {

using RowList = std::vector<std::size_t>;

// Below this many (row, feature) pairs a node is scanned on the calling
// thread; spawning workers costs more than the scan.
constexpr std::size_t kParallelWorkThreshold = 1 << 15;

template <typename Fn>
void parallel_for(std::size_t count, int num_threads, std::size_t work, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, num_threads)));
  if (workers <= 1 || work < kParallelWorkThreshold) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (std::size_t i = 0; i < count; i += workers) fn(i);
}

struct Candidate {
  bool found = false;
  double gain = 0.0;
  double threshold = 0.0;
  NodeStats left;
  NodeStats right;
};

// Sweeps one feature's rows in ascending value order.
Candidate best_on_feature(std::span<const std::size_t> sorted, const std::vector<double>& column,
                          std::span<const GradHess> grad, const NodeStats& total,
                          const Hyperparams& params) {
  Candidate best;
  double gl = 0.0;
  double hl = 0.0;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    const std::size_t r = sorted[i];
    gl += grad[r].g;
    hl += grad[r].h;
    const double v = column[r];
    const double next = column[sorted[i + 1]];
    if (!(next > v)) continue;
    const double gr = total.sum_grad - gl;
    const double hr = total.sum_hess - hl;
    if (hl < params.min_child_weight || hr < params.min_child_weight) continue;
    const double gain = split_gain(gl, hl, gr, hr, params.lambda, params.gamma);
    if (gain > best.gain) {
      double threshold = v + (next - v) / 2.0;
      if (!(threshold > v)) threshold = next;  // adjacent doubles
      best = Candidate{true, gain, threshold, {gl, hl}, {gr, hr}};
    }
  }
  return best;
}

// sorted[k] lists the node's rows ordered by feature features[k].
std::optional<SplitSpec> best_split_presorted(const std::vector<RowList>& sorted,
                                              std::span<const std::size_t> features,
                                              const Columns& columns,
                                              std::span<const GradHess> grad,
                                              const NodeStats& total, const Hyperparams& params,
                                              const ExecOptions& exec) {
  std::vector<Candidate> per_feature(features.size());
  const std::size_t work = features.empty() ? 0 : sorted.front().size() * features.size();
  parallel_for(features.size(), exec.num_threads, work, [&](std::size_t k) {
    per_feature[k] = best_on_feature(sorted[k], columns[features[k]], grad, total, params);
  });
  // Reduction in feature-index order keeps the tie rule independent of the
  // worker count.
  std::optional<SplitSpec> best;
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return features[a] < features[b]; });
  for (std::size_t k : order) {
    const Candidate& c = per_feature[k];
    if (!c.found || !(c.gain > 0.0)) continue;
    if (!best || c.gain > best->gain) {
      best = SplitSpec{features[k], c.threshold, c.gain, c.left, c.right};
    }
  }
  return best;
}

void sort_by_feature(RowList& rows, const std::vector<double>& column) {
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    return column[a] < column[b] || (column[a] == column[b] && a < b);
  });
}

NodeStats sum_stats(std::span<const std::size_t> rows, std::span<const GradHess> grad) {
  NodeStats s;
  for (std::size_t r : rows) {
    s.sum_grad += grad[r].g;
    s.sum_hess += grad[r].h;
  }
  return s;
}

struct PendingNode {
  std::size_t id = 0;
  int depth = 0;
  RowList rows;                 // ascending
  std::vector<RowList> sorted;  // one per feature in `features`
};

RegressionTree grow_presorted(RowList rows, std::vector<RowList> sorted, const Columns& columns,
                              std::span<const GradHess> grad, const Hyperparams& params,
                              std::span<const std::size_t> features, const ExecOptions& exec) {
  RegressionTree tree;
  tree.nodes.emplace_back();
  std::deque<PendingNode> queue;
  queue.push_back(PendingNode{0, 0, std::move(rows), std::move(sorted)});
  std::vector<char> goes_left(columns.empty() ? grad.size() : columns.front().size(), 0);

  while (!queue.empty()) {
    PendingNode node = std::move(queue.front());
    queue.pop_front();
    const NodeStats stats = sum_stats(node.rows, grad);
    std::optional<SplitSpec> split;
    if (node.depth < params.max_depth && stats.sum_hess >= 2.0 * params.min_child_weight) {
      split = best_split_presorted(node.sorted, features, columns, grad, stats, params, exec);
    }
    if (!split) {
      TreeNode& leaf = tree.nodes[node.id];
      leaf.weight = params.eta * leaf_weight(stats.sum_grad, stats.sum_hess, params.lambda);
      continue;
    }

    const auto left_id = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& internal = tree.nodes[node.id];
    internal.feature = static_cast<std::int32_t>(split->feature_index);
    internal.threshold = split->threshold;
    internal.left = static_cast<std::int32_t>(left_id);
    internal.right = static_cast<std::int32_t>(left_id + 1);

    const std::vector<double>& col = columns[split->feature_index];
    for (std::size_t r : node.rows) goes_left[r] = col[r] < split->threshold;
    auto partition = [&](const RowList& in, RowList& left, RowList& right) {
      for (std::size_t r : in) (goes_left[r] ? left : right).push_back(r);
    };
    PendingNode left{left_id, node.depth + 1, {}, std::vector<RowList>(features.size())};
    PendingNode right{left_id + 1, node.depth + 1, {}, std::vector<RowList>(features.size())};
    partition(node.rows, left.rows, right.rows);
    for (std::size_t k = 0; k < features.size(); ++k) {
      left.sorted[k].reserve(left.rows.size());
      right.sorted[k].reserve(right.rows.size());
      partition(node.sorted[k], left.sorted[k], right.sorted[k]);
    }
    queue.push_back(std::move(left));
    queue.push_back(std::move(right));
  }
  return tree;
}

double rmse_over(std::span<const double> pred, std::span<const double> labels,
                 std::span<const std::size_t> idx) {
  double sum = 0.0;
  for (std::size_t i : idx) {
    const double d = pred[i] - labels[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(idx.size()));
}

void check_split(const DataSplit& split, std::size_t n_rows) {
  if (split.train_idx.empty()) fail(ErrorKind::kInvalidArgument, "empty training partition");
  for (const auto* part : {&split.train_idx, &split.val_idx}) {
    for (std::size_t i : *part) {
      if (i >= n_rows) fail(ErrorKind::kInvalidArgument, "split index out of range");
    }
  }
}

// Shared boosting loop for train and continue_training. `pred` holds the
// current model output for every matrix row.
TrainReport boost(Ensemble& model, const FeatureMatrix& matrix, const Columns& columns,
                  const DataSplit& split, std::vector<double>& pred, int rounds,
                  const Hyperparams& params, const ExecOptions& exec) {
  const std::size_t n_features = matrix.num_features();
  RowList train_rows = split.train_idx;
  std::sort(train_rows.begin(), train_rows.end());

  std::vector<RowList> presorted(n_features);
  for (std::size_t j = 0; j < n_features; ++j) {
    presorted[j] = train_rows;
    sort_by_feature(presorted[j], columns[j]);
  }

  std::vector<GradHess> grad(matrix.num_rows());
  std::vector<char> in_sample(matrix.num_rows(), 0);
  const std::size_t trees_before = model.trees.size();
  TrainReport report;
  std::optional<std::size_t> best;
  double best_val = 0.0;

  for (int round = 0; round < rounds; ++round) {
    // Draws are keyed by the tree's position in the ensemble, so a warm
    // start sees the same samples as one longer run.
    SplitMix64 rng(derive_seed(params.seed, trees_before + static_cast<std::size_t>(round)));
    RowList rows;
    if (params.subsample < 1.0) {
      const auto k = std::max<std::size_t>(
          1, static_cast<std::size_t>(params.subsample * static_cast<double>(train_rows.size())));
      for (std::size_t pos : sample_without_replacement(train_rows.size(), k, rng)) {
        rows.push_back(train_rows[pos]);
      }
    } else {
      rows = train_rows;
    }
    std::vector<std::size_t> features;
    if (params.colsample_bytree < 1.0) {
      const auto k = std::max<std::size_t>(
          1, static_cast<std::size_t>(params.colsample_bytree * static_cast<double>(n_features)));
      features = sample_without_replacement(n_features, k, rng);
    } else {
      features.resize(n_features);
      std::iota(features.begin(), features.end(), std::size_t{0});
    }

    for (std::size_t r : rows) grad[r] = grad_hess(pred[r], matrix.labels[r]);
    std::vector<RowList> sorted(features.size());
    if (rows.size() == train_rows.size()) {
      for (std::size_t k = 0; k < features.size(); ++k) sorted[k] = presorted[features[k]];
    } else {
      for (std::size_t r : rows) in_sample[r] = 1;
      for (std::size_t k = 0; k < features.size(); ++k) {
        sorted[k].reserve(rows.size());
        for (std::size_t r : presorted[features[k]]) {
          if (in_sample[r]) sorted[k].push_back(r);
        }
      }
      for (std::size_t r : rows) in_sample[r] = 0;
    }

    RegressionTree tree =
        grow_presorted(std::move(rows), std::move(sorted), columns, grad, params, features, exec);
    for (std::size_t i = 0; i < matrix.num_rows(); ++i) {
      pred[i] += tree.evaluate([&](std::size_t j) { return columns[j][i]; });
    }
    model.trees.push_back(std::move(tree));

    report.train_rmse.push_back(rmse_over(pred, matrix.labels, split.train_idx));
    if (!split.val_idx.empty()) {
      const double v = rmse_over(pred, matrix.labels, split.val_idx);
      report.val_rmse.push_back(v);
      if (!best || v < best_val) {
        best = static_cast<std::size_t>(round);
        best_val = v;
      }
      if (params.early_stopping_rounds &&
          static_cast<std::size_t>(round) - *best >=
              static_cast<std::size_t>(*params.early_stopping_rounds)) {
        break;
      }
    }
  }
  report.best_iteration = best;
  if (params.early_stopping_rounds && best) {
    model.trees.resize(trees_before + *best + 1);
  }
  return report;
}

void check_finite_labels(const FeatureMatrix& matrix) {
  for (double y : matrix.labels) {
    if (!std::isfinite(y)) fail(ErrorKind::kInvalidArgument, "non-finite label");
  }
}

}  // namespace

void Hyperparams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::kInvalidArgument, std::string("hyperparameter out of range: ") + what);
  };
  require(eta > 0.0 && eta <= 1.0, "eta must be in (0, 1]");
  require(n_rounds > 0, "n_rounds must be positive");
  require(max_depth >= 0, "max_depth must be non-negative");
  require(subsample > 0.0 && subsample <= 1.0, "subsample must be in (0, 1]");
  require(colsample_bytree > 0.0 && colsample_bytree <= 1.0, "colsample_bytree must be in (0, 1]");
  require(min_child_weight >= 0.0, "min_child_weight must be >= 0");
  require(lambda >= 0.0, "lambda must be >= 0");
  require(gamma >= 0.0, "gamma must be >= 0");
  require(alpha >= 0.0, "alpha must be >= 0");
  require(!early_stopping_rounds || *early_stopping_rounds > 0,
          "early_stopping_rounds must be positive");
}

GradHess grad_hess(double pred, double target) {
  if (!std::isfinite(pred) || !std::isfinite(target)) {
    fail(ErrorKind::kInvalidArgument, "grad_hess: non-finite input");
  }
  return {pred - target, 1.0};
}

double leaf_weight(double sum_grad, double sum_hess, double lambda) {
  const double denom = sum_hess + lambda;
  return denom == 0.0 ? 0.0 : -sum_grad / denom;
}

double split_gain(double grad_left, double hess_left, double grad_right, double hess_right,
                  double lambda, double gamma) {
  auto score = [lambda](double g, double h) {
    const double denom = h + lambda;
    return denom == 0.0 ? 0.0 : g * g / denom;
  };
  const double parent = score(grad_left + grad_right, hess_left + hess_right);
  return 0.5 * (score(grad_left, hess_left) + score(grad_right, hess_right) - parent) - gamma;
}

Columns to_columns(const FeatureMatrix& m) {
  Columns cols(m.num_features(), std::vector<double>(m.num_rows()));
  for (std::size_t i = 0; i < m.num_rows(); ++i) {
    for (std::size_t j = 0; j < m.num_features(); ++j) cols[j][i] = m.at(i, j);
  }
  return cols;
}

std::optional<SplitSpec> find_best_split(std::span<const std::size_t> rows,
                                         const Columns& columns,
                                         std::span<const GradHess> grad,
                                         const Hyperparams& params,
                                         std::span<const std::size_t> allowed_features,
                                         const ExecOptions& exec) {
  if (rows.empty()) fail(ErrorKind::kInvalidArgument, "find_best_split: no rows");
  std::vector<RowList> sorted(allowed_features.size());
  for (std::size_t k = 0; k < allowed_features.size(); ++k) {
    if (allowed_features[k] >= columns.size()) {
      fail(ErrorKind::kInvalidArgument, "find_best_split: feature index out of range");
    }
    sorted[k].assign(rows.begin(), rows.end());
    sort_by_feature(sorted[k], columns[allowed_features[k]]);
  }
  return best_split_presorted(sorted, allowed_features, columns, grad, sum_stats(rows, grad),
                              params, exec);
}

std::size_t RegressionTree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t out = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
    d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    out = std::max(out, d[i] + 1);
  }
  return out;
}

std::size_t RegressionTree::num_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

double RegressionTree::max_abs_leaf() const {
  double m = 0.0;
  for (const auto& n : nodes) {
    if (n.is_leaf()) m = std::max(m, std::abs(n.weight));
  }
  return m;
}

void RegressionTree::validate(std::size_t num_features) const {
  if (nodes.empty()) fail(ErrorKind::kIntegrity, "tree has no nodes");
  std::vector<int> parents(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& n = nodes[i];
    const std::string where = "node " + std::to_string(i);
    if (n.is_leaf()) {
      if (n.left != -1 || n.right != -1) {
        fail(ErrorKind::kIntegrity, where + ": leaf with children");
      }
      if (!std::isfinite(n.weight)) fail(ErrorKind::kIntegrity, where + ": non-finite weight");
      continue;
    }
    if (static_cast<std::size_t>(n.feature) >= num_features) {
      fail(ErrorKind::kIntegrity, where + ": feature index out of range");
    }
    if (!std::isfinite(n.threshold)) fail(ErrorKind::kIntegrity, where + ": non-finite threshold");
    for (const std::int32_t child : {n.left, n.right}) {
      // Children always follow their parent, which rules out cycles.
      if (child <= static_cast<std::int32_t>(i) ||
          static_cast<std::size_t>(child) >= nodes.size()) {
        fail(ErrorKind::kIntegrity, where + ": child id " + std::to_string(child) + " out of range");
      }
      if (++parents[static_cast<std::size_t>(child)] > 1) {
        fail(ErrorKind::kIntegrity, where + ": child id " + std::to_string(child) + " shared");
      }
    }
  }
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (parents[i] == 0) fail(ErrorKind::kIntegrity, "node " + std::to_string(i) + " unreachable");
  }
}

RegressionTree grow_tree(std::span<const std::size_t> rows, const Columns& columns,
                         std::span<const GradHess> grad, const Hyperparams& params,
                         std::span<const std::size_t> features, const ExecOptions& exec) {
  if (rows.empty()) fail(ErrorKind::kInvalidArgument, "grow_tree: no rows");
  RowList ordered(rows.begin(), rows.end());
  std::sort(ordered.begin(), ordered.end());
  std::vector<RowList> sorted(features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    sorted[k] = ordered;
    sort_by_feature(sorted[k], columns[features[k]]);
  }
  return grow_presorted(std::move(ordered), std::move(sorted), columns, grad, params, features,
                        exec);
}

TrainResult train(const FeatureMatrix& matrix, const DataSplit& split, const Hyperparams& params,
                  const ExecOptions& exec) {
  params.validate();
  matrix.validate();
  check_split(split, matrix.num_rows());
  check_finite_labels(matrix);

  Ensemble model;
  model.feature_names = matrix.feature_names;
  model.target_mode = matrix.target_mode;
  double sum = 0.0;
  for (std::size_t i : split.train_idx) sum += matrix.labels[i];
  model.base_score = sum / static_cast<double>(split.train_idx.size());

  const Columns columns = to_columns(matrix);
  std::vector<double> pred(matrix.num_rows(), model.base_score);
  TrainReport report = boost(model, matrix, columns, split, pred, params.n_rounds, params, exec);
  return {std::move(model), std::move(report)};
}

TrainResult continue_training(const Ensemble& model, const FeatureMatrix& matrix,
                              const DataSplit& split, int extra_rounds,
                              const Hyperparams& params, const ExecOptions& exec) {
  params.validate();
  if (extra_rounds < 0) fail(ErrorKind::kInvalidArgument, "extra_rounds must be >= 0");
  if (model.feature_names != matrix.feature_names) {
    fail(ErrorKind::kSchema, "model features do not match matrix features");
  }
  matrix.validate();
  check_split(split, matrix.num_rows());
  check_finite_labels(matrix);

  Ensemble tuned = model;
  const Columns columns = to_columns(matrix);
  std::vector<double> pred(matrix.num_rows());
  for (std::size_t i = 0; i < matrix.num_rows(); ++i) pred[i] = predict_row(model, matrix.row(i));
  TrainReport report = boost(tuned, matrix, columns, split, pred, extra_rounds, params, exec);
  return {std::move(tuned), std::move(report)};
}

double predict_row(const Ensemble& model, std::span<const double> row) {
  if (row.size() != model.feature_names.size()) {
    fail(ErrorKind::kSchema, "row has " + std::to_string(row.size()) + " values, model expects " +
                                 std::to_string(model.feature_names.size()));
  }
  for (double v : row) {
    if (!std::isfinite(v)) fail(ErrorKind::kInvalidArgument, "non-finite feature value");
  }
  double out = model.base_score;
  for (const auto& tree : model.trees) out += tree.predict(row);
  return out;
}

std::vector<double> predict(const Ensemble& model, const FeatureMatrix& matrix) {
  if (model.feature_names != matrix.feature_names) {
    fail(ErrorKind::kSchema, "model features do not match matrix features");
  }
  std::vector<double> out(matrix.num_rows());
  for (std::size_t i = 0; i < matrix.num_rows(); ++i) out[i] = predict_row(model, matrix.row(i));
  return out;
}

}  // namespace aqcal::gbdt
