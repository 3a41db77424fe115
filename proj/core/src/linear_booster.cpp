#include "aqcal/linear_booster.hpp"

#include <algorithm>
#include <cmath>

#include "aqcal/error.hpp"

namespace aqcal::linear {
namespace {

double rmse_over(const std::vector<double>& pred, const std::vector<double>& labels,
                 const std::vector<std::size_t>& idx) {
  double sum = 0.0;
  for (std::size_t i : idx) sum += (pred[i] - labels[i]) * (pred[i] - labels[i]);
  return std::sqrt(sum / static_cast<double>(idx.size()));
}

// Soft-thresholded coordinate step, clipped so that an L1 step never carries
// the weight across zero.
double coordinate_delta(double sum_grad, double sum_hess, double w, double lambda, double alpha) {
  const double g = sum_grad + lambda * w;
  const double h = sum_hess + lambda;
  if (h < 1e-12) return 0.0;
  const double tmp = w - g / h;
  if (tmp >= 0.0) return std::max(-(g + alpha) / h, -w);
  return std::min(-(g - alpha) / h, -w);
}

}  // namespace

LinearResult train_linear(const FeatureMatrix& matrix, const DataSplit& split,
                          const gbdt::Hyperparams& params) {
  params.validate();
  matrix.validate();
  if (split.train_idx.empty()) fail(ErrorKind::kInvalidArgument, "empty training partition");
  for (const auto* part : {&split.train_idx, &split.val_idx}) {
    for (std::size_t i : *part) {
      if (i >= matrix.num_rows()) fail(ErrorKind::kInvalidArgument, "split index out of range");
    }
  }

  const std::size_t f = matrix.num_features();
  LinearModel model;
  model.weights.assign(f, 0.0);
  model.lambda = params.lambda;
  model.alpha = params.alpha;
  model.eta = params.eta;
  model.feature_names = matrix.feature_names;
  model.target_mode = matrix.target_mode;
  double sum = 0.0;
  for (std::size_t i : split.train_idx) sum += matrix.labels[i];
  model.bias = sum / static_cast<double>(split.train_idx.size());

  std::vector<double> pred(matrix.num_rows(), model.bias);
  gbdt::TrainReport report;
  LinearModel best_model = model;
  double best_val = 0.0;

  for (int round = 0; round < params.n_rounds; ++round) {
    {
      double g = 0.0;
      for (std::size_t i : split.train_idx) g += pred[i] - matrix.labels[i];
      const double delta = params.eta * (-g / static_cast<double>(split.train_idx.size()));
      model.bias += delta;
      for (double& p : pred) p += delta;
    }
    for (std::size_t j = 0; j < f; ++j) {
      double sum_grad = 0.0;
      double sum_hess = 0.0;
      for (std::size_t i : split.train_idx) {
        const double x = matrix.at(i, j);
        sum_grad += (pred[i] - matrix.labels[i]) * x;
        sum_hess += x * x;
      }
      const double delta =
          params.eta * coordinate_delta(sum_grad, sum_hess, model.weights[j], params.lambda,
                                        params.alpha);
      if (delta == 0.0) continue;
      model.weights[j] += delta;
      for (std::size_t i = 0; i < matrix.num_rows(); ++i) pred[i] += delta * matrix.at(i, j);
    }

    report.train_rmse.push_back(rmse_over(pred, matrix.labels, split.train_idx));
    if (!split.val_idx.empty()) {
      const double v = rmse_over(pred, matrix.labels, split.val_idx);
      report.val_rmse.push_back(v);
      if (!report.best_iteration || v < best_val) {
        report.best_iteration = static_cast<std::size_t>(round);
        best_val = v;
        best_model = model;
      }
      if (params.early_stopping_rounds &&
          static_cast<std::size_t>(round) - *report.best_iteration >=
              static_cast<std::size_t>(*params.early_stopping_rounds)) {
        break;
      }
    }
  }
  if (params.early_stopping_rounds && report.best_iteration) model = best_model;
  return {std::move(model), std::move(report)};
}

double predict_linear_row(const LinearModel& model, std::span<const double> row) {
  if (row.size() != model.weights.size()) {
    fail(ErrorKind::kSchema, "row has " + std::to_string(row.size()) + " values, model expects " +
                                 std::to_string(model.weights.size()));
  }
  double out = model.bias;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!std::isfinite(row[j])) fail(ErrorKind::kInvalidArgument, "non-finite feature value");
    out += model.weights[j] * row[j];
  }
  return out;
}

std::vector<double> predict_linear(const LinearModel& model, const FeatureMatrix& matrix) {
  if (model.feature_names != matrix.feature_names) {
    fail(ErrorKind::kSchema, "model features do not match matrix features");
  }
  std::vector<double> out(matrix.num_rows());
  for (std::size_t i = 0; i < matrix.num_rows(); ++i) {
    out[i] = predict_linear_row(model, matrix.row(i));
  }
  return out;
}

}  // namespace aqcal::linear
