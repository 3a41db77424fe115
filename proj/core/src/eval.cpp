#include "aqcal/eval.hpp"

#include <cmath>

#include "aqcal/error.hpp"
#include "aqcal/format.hpp"

namespace aqcal::eval {
namespace {

void check_mode(TargetMode model_mode, const FeatureMatrix& matrix) {
  if (model_mode != matrix.target_mode) {
    fail(ErrorKind::kSchema, "model predicts " + std::string(to_string(model_mode)) +
                                 " targets but the matrix holds " +
                                 std::string(to_string(matrix.target_mode)) + " labels");
  }
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) fail(ErrorKind::kInvalidArgument, "rmse: length mismatch");
  if (pred.empty()) fail(ErrorKind::kInvalidArgument, "rmse: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

EvalReport evaluate_predictions(std::span<const double> pred, const FeatureMatrix& matrix,
                                std::span<const std::size_t> rows) {
  if (rows.empty()) fail(ErrorKind::kInvalidArgument, "evaluate: no rows");
  if (pred.size() != matrix.num_rows()) {
    fail(ErrorKind::kInvalidArgument, "evaluate: one prediction per matrix row required");
  }
  std::map<std::string, double> sq;
  EvalReport report;
  double total = 0.0;
  for (std::size_t i : rows) {
    if (i >= matrix.num_rows()) fail(ErrorKind::kInvalidArgument, "evaluate: row out of range");
    const double d = pred[i] - matrix.labels[i];
    total += d * d;
    sq[matrix.sensor_ids[i]] += d * d;
    ++report.per_sensor_rows[matrix.sensor_ids[i]];
  }
  report.n_rows = rows.size();
  report.overall_rmse = std::sqrt(total / static_cast<double>(rows.size()));
  for (const auto& [id, s] : sq) {
    const double r = std::sqrt(s / static_cast<double>(report.per_sensor_rows[id]));
    report.per_sensor_rmse[id] = r;
    report.summed_rmse += r;
  }
  return report;
}

EvalReport evaluate(const gbdt::Ensemble& model, const FeatureMatrix& matrix,
                    std::span<const std::size_t> rows) {
  check_mode(model.target_mode, matrix);
  return evaluate_predictions(gbdt::predict(model, matrix), matrix, rows);
}

EvalReport evaluate(const linear::LinearModel& model, const FeatureMatrix& matrix,
                    std::span<const std::size_t> rows) {
  check_mode(model.target_mode, matrix);
  return evaluate_predictions(linear::predict_linear(model, matrix), matrix, rows);
}

std::string export_curves(const gbdt::TrainReport& report) {
  std::string out = "round,train_rmse,val_rmse\n";
  for (std::size_t r = 0; r < report.train_rmse.size(); ++r) {
    out += std::to_string(r);
    out += ',';
    out += format_real(report.train_rmse[r]);
    out += ',';
    if (r < report.val_rmse.size()) out += format_real(report.val_rmse[r]);
    out += '\n';
  }
  return out;
}

std::string format_text(const EvalReport& report) {
  std::string out;
  out += "rows:          " + std::to_string(report.n_rows) + "\n";
  out += "overall RMSE:  " + format_real(report.overall_rmse) + "\n";
  out += "summed RMSE:   " + format_real(report.summed_rmse) + "\n";
  out += "per sensor:\n";
  for (const auto& [id, r] : report.per_sensor_rmse) {
    out += "  " + id + "  " + format_real(r) + "  (" +
           std::to_string(report.per_sensor_rows.at(id)) + " rows)\n";
  }
  return out;
}

std::string format_record(const EvalReport& report) {
  std::string out = "{\"n_rows\":" + std::to_string(report.n_rows) +
                    ",\"overall_rmse\":" + format_real(report.overall_rmse) +
                    ",\"per_sensor_rmse\":{";
  bool first = true;
  for (const auto& [id, r] : report.per_sensor_rmse) {
    if (!first) out += ',';
    first = false;
    out += json_string(id) + ":" + format_real(r);
  }
  out += "},\"summed_rmse\":" + format_real(report.summed_rmse) + "}";
  return out;
}

}  // namespace aqcal::eval
