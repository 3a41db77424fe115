#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>

#include "aqcal/gbdt.hpp"
#include "aqcal/linear_booster.hpp"
#include "aqcal/preprocess.hpp"

namespace aqcal::eval {

// sqrt(mean((pred - target)^2)). Throws kInvalidArgument on empty or
// mismatched inputs.
double rmse(std::span<const double> pred, std::span<const double> target);

struct EvalReport {
  double overall_rmse = 0.0;  // pooled over all rows
  std::map<std::string, double> per_sensor_rmse;
  std::map<std::string, std::size_t> per_sensor_rows;
  double summed_rmse = 0.0;  // sum of per-sensor values
  std::size_t n_rows = 0;
};

// Scores `pred` (one value per matrix row) against the labels on `rows`.
EvalReport evaluate_predictions(std::span<const double> pred, const FeatureMatrix& matrix,
                                std::span<const std::size_t> rows);

// Both throw kSchema when the model's target mode or features differ from
// the matrix's.
EvalReport evaluate(const gbdt::Ensemble& model, const FeatureMatrix& matrix,
                    std::span<const std::size_t> rows);
EvalReport evaluate(const linear::LinearModel& model, const FeatureMatrix& matrix,
                    std::span<const std::size_t> rows);

// "round,train_rmse,val_rmse" then one line per round (0-based); the val
// cell is empty when the report has no validation curve.
std::string export_curves(const gbdt::TrainReport& report);

// Multi-line summary for people.
std::string format_text(const EvalReport& report);
// Single-line JSON record for machines.
std::string format_record(const EvalReport& report);

}  // namespace aqcal::eval
