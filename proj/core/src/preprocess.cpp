#include "aqcal/preprocess.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "aqcal/error.hpp"
#include "aqcal/format.hpp"
#include "aqcal/rng.hpp"

namespace aqcal {

std::string_view to_string(TargetMode mode) {
  return mode == TargetMode::kOffset ? "offset" : "absolute";
}

TargetMode parse_target_mode(std::string_view text) {
  if (text == "offset") return TargetMode::kOffset;
  if (text == "absolute") return TargetMode::kAbsolute;
  fail(ErrorKind::kConfig, "unknown target mode '" + std::string(text) + "'");
}

void FeatureMatrix::validate() const {
  const std::size_t n = num_rows();
  if (values.size() != n * num_features() || sensor_ids.size() != n || timestamps.size() != n) {
    fail(ErrorKind::kIntegrity, "feature matrix arrays have inconsistent lengths");
  }
  std::set<std::string> seen(feature_names.begin(), feature_names.end());
  if (seen.size() != feature_names.size()) {
    fail(ErrorKind::kIntegrity, "feature names are not unique");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      fail(ErrorKind::kIntegrity, "non-finite feature value at row " +
                                      std::to_string(i / std::max<std::size_t>(1, num_features())));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(labels[i])) {
      fail(ErrorKind::kIntegrity, "non-finite label at row " + std::to_string(i));
    }
  }
}

FeatureMatrix FeatureMatrix::select_features(const std::vector<std::string>& names) const {
  std::vector<std::size_t> cols;
  for (const auto& name : names) {
    const auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) fail(ErrorKind::kSchema, "no feature named '" + name + "'");
    cols.push_back(static_cast<std::size_t>(it - feature_names.begin()));
  }
  FeatureMatrix out;
  out.feature_names = names;
  out.labels = labels;
  out.sensor_ids = sensor_ids;
  out.timestamps = timestamps;
  out.target_mode = target_mode;
  out.excluded_rows = excluded_rows;
  out.values.reserve(num_rows() * cols.size());
  for (std::size_t i = 0; i < num_rows(); ++i) {
    for (std::size_t c : cols) out.values.push_back(at(i, c));
  }
  return out;
}

namespace preprocess {
namespace {

using ingest::SensorRecord;
using ingest::SensorSeries;
using Channel = std::optional<double> SensorRecord::*;

constexpr std::array<Channel, 6> kChannels = {
    &SensorRecord::raw_pm25,      &SensorRecord::ref_pm25,     &SensorRecord::temp_internal,
    &SensorRecord::temp_external, &SensorRecord::hum_internal, &SensorRecord::hum_external};
constexpr std::size_t kNumChannels = kChannels.size();

double feature_value(const SensorRecord& rec, std::size_t j) {
  std::optional<double> v;
  switch (j) {
    case 0: v = rec.raw_pm25; break;
    case 1: return rec.longitude;
    case 2: return rec.latitude;
    case 3: v = rec.temp_internal; break;
    case 4: v = rec.temp_external; break;
    case 5: v = rec.hum_internal; break;
    case 6: v = rec.hum_external; break;
    default: break;
  }
  if (!v) {
    fail(ErrorKind::kIntegrity, "missing " + feature_names()[j] + " for sensor '" +
                                    rec.sensor_id + "' at " + std::to_string(rec.timestamp) +
                                    "; impute before building features");
  }
  return *v;
}

std::optional<double> label_value(const SensorRecord& rec, TargetMode mode) {
  if (!rec.ref_pm25) return std::nullopt;
  if (mode == TargetMode::kAbsolute) return *rec.ref_pm25;
  if (!rec.raw_pm25) return std::nullopt;
  return *rec.ref_pm25 - *rec.raw_pm25;
}

}  // namespace

std::string_view to_string(FillStrategy s) {
  switch (s) {
    case FillStrategy::kDropRows: return "drop";
    case FillStrategy::kImputeMean: return "mean";
    case FillStrategy::kImputeMedian: return "median";
    case FillStrategy::kForwardBackward: return "ffbf";
  }
  return "ffbf";
}

FillStrategy parse_fill_strategy(std::string_view text) {
  if (text == "drop") return FillStrategy::kDropRows;
  if (text == "mean") return FillStrategy::kImputeMean;
  if (text == "median") return FillStrategy::kImputeMedian;
  if (text == "ffbf") return FillStrategy::kForwardBackward;
  fail(ErrorKind::kConfig, "unknown fill strategy '" + std::string(text) + "'");
}

std::string_view to_string(SplitMode m) {
  return m == SplitMode::kChronological ? "chrono" : "random";
}

SplitMode parse_split_mode(std::string_view text) {
  if (text == "chrono") return SplitMode::kChronological;
  if (text == "random") return SplitMode::kRandom;
  fail(ErrorKind::kConfig, "unknown split mode '" + std::string(text) + "'");
}

std::vector<bool> missing_mask(const Column& column) {
  std::vector<bool> mask(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) mask[i] = !column[i].has_value();
  return mask;
}

std::vector<double> fill_missing(const Column& column, FillStrategy strategy) {
  if (strategy == FillStrategy::kDropRows) {
    fail(ErrorKind::kInvalidArgument, "DropRows does not impute; use missing_mask");
  }
  std::vector<double> observed;
  for (const auto& v : column) {
    if (v) observed.push_back(*v);
  }
  if (observed.empty() && !column.empty()) {
    fail(ErrorKind::kUnfillable, "column has no observed values");
  }
  std::vector<double> out(column.size());
  switch (strategy) {
    case FillStrategy::kForwardBackward: {
      std::optional<double> last;
      for (std::size_t i = 0; i < column.size(); ++i) {
        if (column[i]) last = column[i];
        out[i] = last.value_or(0.0);
      }
      // Leading gap takes the first observation.
      const auto first = std::find_if(column.begin(), column.end(),
                                      [](const auto& v) { return v.has_value(); });
      for (auto it = column.begin(); it != first; ++it) out[it - column.begin()] = **first;
      return out;
    }
    case FillStrategy::kImputeMean:
    case FillStrategy::kImputeMedian: {
      double stat = 0.0;
      if (strategy == FillStrategy::kImputeMean) {
        stat = std::accumulate(observed.begin(), observed.end(), 0.0) /
               static_cast<double>(observed.size());
      } else {
        std::sort(observed.begin(), observed.end());
        const std::size_t m = observed.size() / 2;
        stat = observed.size() % 2 ? observed[m] : 0.5 * (observed[m - 1] + observed[m]);
      }
      for (std::size_t i = 0; i < column.size(); ++i) out[i] = column[i].value_or(stat);
      return out;
    }
    case FillStrategy::kDropRows: break;
  }
  return out;
}

SensorSeries impute(const SensorSeries& series, FillStrategy strategy) {
  SensorSeries out;
  for (const auto& [id, records] : series) {
    if (strategy == FillStrategy::kDropRows) {
      auto& kept = out[id];
      for (const auto& rec : records) {
        bool complete = true;
        for (std::size_t c = 0; c < kNumChannels; ++c) complete &= (rec.*kChannels[c]).has_value();
        if (complete) kept.push_back(rec);
      }
      if (kept.empty()) out.erase(id);
      continue;
    }
    std::vector<SensorRecord> filled = records;
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      const Channel ch = kChannels[c];
      Column col;
      col.reserve(records.size());
      for (const auto& rec : records) col.push_back(rec.*ch);
      std::vector<double> values;
      try {
        values = fill_missing(col, strategy);
      } catch (const Error& e) {
        fail(e.kind(), "sensor '" + id + "': " + e.what());
      }
      for (std::size_t i = 0; i < filled.size(); ++i) filled[i].*ch = values[i];
    }
    out.emplace(id, std::move(filled));
  }
  return out;
}

SensorSeries truncate_to_min(const SensorSeries& series) {
  if (series.empty()) fail(ErrorKind::kInvalidArgument, "no sensors to truncate");
  std::size_t min_len = std::numeric_limits<std::size_t>::max();
  for (const auto& [id, records] : series) {
    if (records.empty()) fail(ErrorKind::kInvalidArgument, "sensor '" + id + "' has no records");
    min_len = std::min(min_len, records.size());
  }
  SensorSeries out;
  for (const auto& [id, records] : series) {
    out.emplace(id, std::vector<SensorRecord>(records.begin(),
                                              records.begin() + static_cast<std::ptrdiff_t>(min_len)));
  }
  return out;
}

FeatureMatrix build_features(const SensorSeries& series, TargetMode mode) {
  std::vector<const SensorRecord*> rows;
  for (const auto& [id, records] : series) {
    for (const auto& rec : records) rows.push_back(&rec);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SensorRecord* a, const SensorRecord* b) {
    return std::tie(a->timestamp, a->sensor_id) < std::tie(b->timestamp, b->sensor_id);
  });

  FeatureMatrix m;
  m.feature_names = feature_names();
  m.target_mode = mode;
  const std::size_t f = m.feature_names.size();
  m.values.reserve(rows.size() * f);
  for (const SensorRecord* rec : rows) {
    const auto label = label_value(*rec, mode);
    if (!label) {
      ++m.excluded_rows;
      continue;
    }
    for (std::size_t j = 0; j < f; ++j) m.values.push_back(feature_value(*rec, j));
    m.labels.push_back(*label);
    m.sensor_ids.push_back(rec->sensor_id);
    m.timestamps.push_back(rec->timestamp);
  }
  if (m.labels.empty()) fail(ErrorKind::kInvalidArgument, "no usable rows with a reference reading");
  m.validate();
  return m;
}

std::vector<FeatureMatrix> build_kernel_features(const SensorSeries& series, TargetMode mode) {
  if (series.empty()) fail(ErrorKind::kInvalidArgument, "no sensors");
  const std::size_t len = series.begin()->second.size();
  for (const auto& [id, records] : series) {
    if (records.size() != len) {
      fail(ErrorKind::kInvalidArgument, "kernel layout needs equal-length series");
    }
    for (std::size_t t = 0; t < len; ++t) {
      if (records[t].timestamp != series.begin()->second[t].timestamp) {
        fail(ErrorKind::kInvalidArgument, "kernel layout needs time-aligned series");
      }
    }
  }

  FeatureMatrix shared;
  shared.target_mode = mode;
  for (const auto& [id, records] : series) {
    for (const auto& name : feature_names()) shared.feature_names.push_back(id + ":" + name);
  }
  for (std::size_t t = 0; t < len; ++t) {
    for (const auto& [id, records] : series) {
      for (std::size_t j = 0; j < feature_names().size(); ++j) {
        shared.values.push_back(feature_value(records[t], j));
      }
    }
  }

  std::vector<FeatureMatrix> out;
  for (const auto& [id, records] : series) {
    FeatureMatrix m;
    m.feature_names = shared.feature_names;
    m.target_mode = mode;
    for (std::size_t t = 0; t < len; ++t) {
      const auto label = label_value(records[t], mode);
      if (!label) {
        ++m.excluded_rows;
        continue;
      }
      const auto row = shared.row(t);
      m.values.insert(m.values.end(), row.begin(), row.end());
      m.labels.push_back(*label);
      m.sensor_ids.push_back(id);
      m.timestamps.push_back(records[t].timestamp);
    }
    out.push_back(std::move(m));
  }
  return out;
}

DataSplit make_split(std::size_t n_rows, SplitMode mode, std::uint64_t seed) {
  if (n_rows < 3) fail(ErrorKind::kInvalidArgument, "split needs at least 3 rows");
  // Integer arithmetic keeps floor(0.7 n) exact for every n.
  const std::size_t n_train = n_rows * 7 / 10;
  const std::size_t n_val = n_rows * 15 / 100;
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == SplitMode::kRandom) {
    SplitMix64 rng(seed);
    order = permutation(n_rows, rng);
  }
  DataSplit split;
  split.train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                       order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  for (auto* part : {&split.train_idx, &split.val_idx, &split.test_idx}) {
    std::sort(part->begin(), part->end());
  }
  return split;
}

FeatureMatrix prepare(const std::vector<ingest::SensorRecord>& records, FillStrategy fill,
                      TargetMode mode) {
  return build_features(truncate_to_min(impute(ingest::group_by_sensor(records), fill)), mode);
}

std::string write_matrix_csv(const FeatureMatrix& m) {
  ingest::RawTable t;
  t.column_names = m.feature_names;
  for (const char* extra : {"label", "sensor_id", "timestamp"}) t.column_names.emplace_back(extra);
  t.rows.reserve(m.num_rows());
  for (std::size_t i = 0; i < m.num_rows(); ++i) {
    std::vector<ingest::Cell> row;
    for (double v : m.row(i)) row.emplace_back(v);
    row.emplace_back(m.labels[i]);
    row.emplace_back(m.sensor_ids[i]);
    row.emplace_back(static_cast<double>(m.timestamps[i]));
    t.rows.push_back(std::move(row));
  }
  return ingest::write_csv(t);
}

FeatureMatrix read_matrix_csv(std::string_view text, TargetMode mode) {
  const ingest::RawTable t = ingest::parse_csv(text);
  const std::size_t w = t.column_names.size();
  if (w < 3 || t.column_names[w - 3] != "label" || t.column_names[w - 2] != "sensor_id" ||
      t.column_names[w - 1] != "timestamp") {
    fail(ErrorKind::kSchema, "matrix CSV must end with label,sensor_id,timestamp columns");
  }
  FeatureMatrix m;
  m.target_mode = mode;
  m.feature_names.assign(t.column_names.begin(), t.column_names.end() - 3);
  const std::size_t f = m.feature_names.size();
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    const auto& row = t.rows[r];
    auto number = [&](std::size_t c) {
      if (const auto* v = std::get_if<double>(&row[c])) return *v;
      fail(ErrorKind::kParse, "matrix row " + std::to_string(r + 1) + ", column '" +
                                  t.column_names[c] + "': expected a number");
    };
    for (std::size_t j = 0; j < f; ++j) m.values.push_back(number(j));
    m.labels.push_back(number(f));
    if (const auto* s = std::get_if<std::string>(&row[f + 1])) {
      m.sensor_ids.push_back(*s);
    } else {
      fail(ErrorKind::kParse, "matrix row " + std::to_string(r + 1) + ": sensor_id must be text");
    }
    const double ts = number(f + 2);
    m.timestamps.push_back(static_cast<std::int64_t>(ts));
  }
  m.validate();
  return m;
}

std::string write_split_csv(const DataSplit& split) {
  std::vector<std::pair<std::size_t, const char*>> rows;
  for (auto i : split.train_idx) rows.emplace_back(i, "train");
  for (auto i : split.val_idx) rows.emplace_back(i, "val");
  for (auto i : split.test_idx) rows.emplace_back(i, "test");
  std::sort(rows.begin(), rows.end());
  std::string out = "index,partition\n";
  for (const auto& [i, part] : rows) {
    out += std::to_string(i);
    out += ',';
    out += part;
    out += '\n';
  }
  return out;
}

DataSplit read_split_csv(std::string_view text, std::size_t n_rows) {
  const ingest::RawTable t = ingest::parse_csv(text);
  if (t.column_names != std::vector<std::string>{"index", "partition"}) {
    fail(ErrorKind::kSchema, "split CSV header must be index,partition");
  }
  DataSplit split;
  std::vector<bool> seen(n_rows, false);
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    const auto* idx = std::get_if<double>(&t.rows[r][0]);
    const auto* part = std::get_if<std::string>(&t.rows[r][1]);
    if (!idx || !part || *idx < 0 || std::floor(*idx) != *idx ||
        *idx >= static_cast<double>(n_rows)) {
      fail(ErrorKind::kParse, "split row " + std::to_string(r + 1) + " is malformed");
    }
    const auto i = static_cast<std::size_t>(*idx);
    if (seen[i]) fail(ErrorKind::kIntegrity, "row " + std::to_string(i) + " assigned twice");
    seen[i] = true;
    if (*part == "train") split.train_idx.push_back(i);
    else if (*part == "val") split.val_idx.push_back(i);
    else if (*part == "test") split.test_idx.push_back(i);
    else fail(ErrorKind::kParse, "unknown partition '" + *part + "'");
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    fail(ErrorKind::kIntegrity, "split does not cover every matrix row");
  }
  for (auto* part : {&split.train_idx, &split.val_idx, &split.test_idx}) {
    std::sort(part->begin(), part->end());
  }
  return split;
}

}  // namespace preprocess
}  // namespace aqcal
