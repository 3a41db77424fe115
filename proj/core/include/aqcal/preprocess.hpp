#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aqcal/ingest.hpp"

namespace aqcal {

enum class TargetMode {
  kOffset,    // label = ref_pm25 - raw_pm25, the calibration adjustment
  kAbsolute,  // label = ref_pm25
};

std::string_view to_string(TargetMode mode);
TargetMode parse_target_mode(std::string_view text);

// Dense training input. `values` is row-major with feature_names.size()
// columns. Rows carry their sensor and timestamp for per-sensor evaluation.
struct FeatureMatrix {
  std::vector<std::string> feature_names;
  std::vector<double> values;
  std::vector<double> labels;
  std::vector<std::string> sensor_ids;
  std::vector<std::int64_t> timestamps;
  TargetMode target_mode = TargetMode::kOffset;
  // Rows dropped by build_features because the reference was missing.
  std::size_t excluded_rows = 0;

  std::size_t num_rows() const { return labels.size(); }
  std::size_t num_features() const { return feature_names.size(); }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * num_features(), num_features()};
  }
  double at(std::size_t i, std::size_t j) const { return values[i * num_features() + j]; }

  // Throws kIntegrity if array lengths disagree, names repeat or any value
  // is non-finite.
  void validate() const;

  // Copy keeping only the named features, in the given order.
  FeatureMatrix select_features(const std::vector<std::string>& names) const;
};

// Indices into a FeatureMatrix. Disjoint, covering 0..n-1.
struct DataSplit {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
};

namespace preprocess {

enum class FillStrategy { kDropRows, kImputeMean, kImputeMedian, kForwardBackward };

std::string_view to_string(FillStrategy s);
FillStrategy parse_fill_strategy(std::string_view text);

// Feature order fed to the learner.
inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = {
      "raw_pm25",      "longitude",   "latitude",    "temp_internal",
      "temp_external", "hum_internal", "hum_external"};
  return names;
}

using Column = std::vector<std::optional<double>>;

// Imputes one column. Throws kUnfillable when no value is observed. Not
// valid for kDropRows (use missing_mask).
std::vector<double> fill_missing(const Column& column, FillStrategy strategy);

// true where the cell is missing; what kDropRows removes.
std::vector<bool> missing_mask(const Column& column);

// Applies `strategy` per sensor to every optional channel (the seven feature
// channels and the reference). kDropRows removes records with any missing
// channel instead.
ingest::SensorSeries impute(const ingest::SensorSeries& series, FillStrategy strategy);

// Keeps the first L records of every sensor, L the shortest series length.
ingest::SensorSeries truncate_to_min(const ingest::SensorSeries& series);

// Rows ordered by (timestamp, sensor_id) so that row order is chronological.
// Rows without a reference reading are skipped and counted in
// excluded_rows; a missing feature is a kIntegrity error.
FeatureMatrix build_features(const ingest::SensorSeries& series, TargetMode mode);

// One matrix per sensor for the "input kernel" layout: each row is one
// timestamp, features are every sensor's seven channels (prefixed
// "<sensor>:"), and the label is that sensor's target. Requires equal-length,
// time-aligned series.
std::vector<FeatureMatrix> build_kernel_features(const ingest::SensorSeries& series,
                                                 TargetMode mode);

enum class SplitMode { kChronological, kRandom };

std::string_view to_string(SplitMode m);
SplitMode parse_split_mode(std::string_view text);

// train = floor(0.7 n), val = floor(0.15 n), test = the remainder.
DataSplit make_split(std::size_t n_rows, SplitMode mode, std::uint64_t seed = 0);

// impute -> truncate_to_min -> build_features.
FeatureMatrix prepare(const std::vector<ingest::SensorRecord>& records, FillStrategy fill,
                      TargetMode mode);

// Persisted layout: header = feature names + "label","sensor_id","timestamp".
std::string write_matrix_csv(const FeatureMatrix& m);
FeatureMatrix read_matrix_csv(std::string_view text, TargetMode mode);

// Split file: header "index,partition", one line per row.
std::string write_split_csv(const DataSplit& split);
DataSplit read_split_csv(std::string_view text, std::size_t n_rows);

}  // namespace preprocess
}  // namespace aqcal
