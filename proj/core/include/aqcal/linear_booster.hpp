#pragma once

#include <span>
#include <string>
#include <vector>

#include "aqcal/gbdt.hpp"
#include "aqcal/preprocess.hpp"

namespace aqcal::linear {

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  double lambda = 1.0;
  double alpha = 0.0;
  double eta = 0.3;
  std::vector<std::string> feature_names;
  TargetMode target_mode = TargetMode::kOffset;

  bool operator==(const LinearModel&) const = default;
};

struct LinearResult {
  LinearModel model;
  gbdt::TrainReport report;
};

// Cyclic coordinate descent on squared loss, features in index order. Each
// round updates the bias (unregularized) and then every weight once:
//   delta_j = -(sum g_i x_ij + lambda w_j) / (sum h_i x_ij^2 + lambda),
// soft-thresholded by alpha and scaled by eta; predictions are refreshed
// after every coordinate. Uses eta, n_rounds, lambda, alpha and
// early_stopping_rounds from `params`.
LinearResult train_linear(const FeatureMatrix& matrix, const DataSplit& split,
                          const gbdt::Hyperparams& params);

double predict_linear_row(const LinearModel& model, std::span<const double> row);
std::vector<double> predict_linear(const LinearModel& model, const FeatureMatrix& matrix);

}  // namespace aqcal::linear
