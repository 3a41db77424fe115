#include "aqcal/preprocess.hpp"

#include <gtest/gtest.h>

#include <random>

#include "aqcal/error.hpp"

namespace aqcal::preprocess {
namespace {

using ingest::SensorRecord;
using ingest::SensorSeries;

SensorRecord record(const std::string& id, std::int64_t t, double raw, std::optional<double> ref) {
  SensorRecord r;
  r.sensor_id = id;
  r.timestamp = t;
  r.raw_pm25 = raw;
  r.ref_pm25 = ref;
  r.longitude = 4.4;
  r.latitude = 51.2;
  r.temp_internal = 20.0;
  r.temp_external = 15.0;
  r.hum_internal = 40.0;
  r.hum_external = 50.0;
  return r;
}

SensorSeries series_with_lengths(std::initializer_list<std::pair<const char*, int>> lengths) {
  SensorSeries s;
  for (const auto& [id, n] : lengths) {
    for (int t = 0; t < n; ++t) s[id].push_back(record(id, t, t, t + 1.0));
  }
  return s;
}

TEST(FillMissing, ForwardBackward) {
  const Column c{std::nullopt, 2.0, std::nullopt, 5.0};
  EXPECT_EQ(fill_missing(c, FillStrategy::kForwardBackward), (std::vector<double>{2, 2, 2, 5}));
}

TEST(FillMissing, MeanAndMedian) {
  EXPECT_EQ(fill_missing({1.0, std::nullopt, 3.0}, FillStrategy::kImputeMean),
            (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(fill_missing({1.0, std::nullopt, 3.0, 10.0}, FillStrategy::kImputeMedian),
            (std::vector<double>{1, 3, 3, 10}));
}

TEST(FillMissing, AllMissingIsUnfillable) {
  for (auto s : {FillStrategy::kForwardBackward, FillStrategy::kImputeMean,
                 FillStrategy::kImputeMedian}) {
    try {
      fill_missing({std::nullopt, std::nullopt}, s);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kUnfillable);
    }
  }
}

TEST(FillMissing, DropRowsMask) {
  EXPECT_EQ(missing_mask({1.0, std::nullopt, 3.0}), (std::vector<bool>{false, true, false}));
}

TEST(FillMissing, NoMissingAfterImputeAndIdempotentProperty) {
  std::mt19937_64 gen(5);
  std::bernoulli_distribution miss(0.4);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 200; ++trial) {
    Column c(1 + trial % 37);
    for (auto& v : c) {
      if (!miss(gen)) v = u(gen);
    }
    c[gen() % c.size()] = u(gen);
    for (auto s : {FillStrategy::kForwardBackward, FillStrategy::kImputeMean,
                   FillStrategy::kImputeMedian}) {
      const auto out = fill_missing(c, s);
      ASSERT_EQ(out.size(), c.size());
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i]) EXPECT_EQ(out[i], *c[i]);
      }
    }
    const auto once = fill_missing(c, FillStrategy::kForwardBackward);
    const Column again(once.begin(), once.end());
    EXPECT_EQ(fill_missing(again, FillStrategy::kForwardBackward), once);
  }
}

TEST(Truncate, ToShortest) {
  const auto out = truncate_to_min(series_with_lengths({{"A", 100}, {"B", 90}, {"C", 95}}));
  for (const auto& [id, recs] : out) EXPECT_EQ(recs.size(), 90u);
}

TEST(Truncate, EqualLengthsUnchanged) {
  const auto in = series_with_lengths({{"A", 5}, {"B", 5}});
  EXPECT_EQ(truncate_to_min(in), in);
}

TEST(Truncate, DropsTenPercentOfLongest) {
  const auto in = series_with_lengths({{"A", 100}, {"B", 90}});
  const auto out = truncate_to_min(in);
  EXPECT_EQ(in.at("A").size() - out.at("A").size(), 10u);
  EXPECT_TRUE(std::equal(out.at("A").begin(), out.at("A").end(), in.at("A").begin()));
}

TEST(Truncate, EmptyMapIsError) {
  EXPECT_THROW(truncate_to_min({}), Error);
}

TEST(BuildFeatures, OffsetAndAbsoluteLabels) {
  SensorSeries s;
  s["A"].push_back(record("A", 0, 10.0, 12.0));
  EXPECT_EQ(build_features(s, TargetMode::kOffset).labels, std::vector<double>{2.0});
  EXPECT_EQ(build_features(s, TargetMode::kAbsolute).labels, std::vector<double>{12.0});
}

TEST(BuildFeatures, MissingReferenceExcludedAndCounted) {
  SensorSeries s;
  s["A"].push_back(record("A", 0, 10.0, 12.0));
  s["A"].push_back(record("A", 1, 10.0, std::nullopt));
  const auto m = build_features(s, TargetMode::kOffset);
  EXPECT_EQ(m.num_rows(), 1u);
  EXPECT_EQ(m.excluded_rows, 1u);
}

TEST(BuildFeatures, NoUsableRowsIsError) {
  SensorSeries s;
  s["A"].push_back(record("A", 0, 10.0, std::nullopt));
  EXPECT_THROW(build_features(s, TargetMode::kOffset), Error);
}

TEST(BuildFeatures, FixedOrderNoNormalizationChronologicalRows) {
  SensorSeries s;
  auto a = record("A", 10, 7.5, 8.0);
  a.longitude = -3.25;
  a.hum_external = 99.0;
  s["A"] = {record("A", 0, 1, 2), a};
  s["B"] = {record("B", 5, 3, 4)};
  const auto m = build_features(s, TargetMode::kOffset);
  EXPECT_EQ(m.feature_names, feature_names());
  EXPECT_EQ(m.timestamps, (std::vector<std::int64_t>{0, 5, 10}));
  EXPECT_EQ(m.sensor_ids, (std::vector<std::string>{"A", "B", "A"}));
  const auto last = m.row(2);
  EXPECT_EQ(last[0], 7.5);
  EXPECT_EQ(last[1], -3.25);
  EXPECT_EQ(last[2], 51.2);
  EXPECT_EQ(last[6], 99.0);
}

TEST(Impute, PerSensorNoCrossing) {
  SensorSeries s;
  auto a0 = record("A", 0, 1, 2);
  auto a1 = record("A", 1, 1, 2);
  a1.temp_external.reset();
  auto b0 = record("B", 0, 1, 2);
  b0.temp_external = 99.0;
  s["A"] = {a0, a1};
  s["B"] = {b0};
  const auto out = impute(s, FillStrategy::kForwardBackward);
  EXPECT_EQ(out.at("A")[1].temp_external, 15.0);
  const auto dropped = impute(s, FillStrategy::kDropRows);
  EXPECT_EQ(dropped.at("A").size(), 1u);
}

TEST(Impute, WholeChannelMissingIsUnfillable) {
  SensorSeries s;
  auto a = record("A", 0, 1, 2);
  a.hum_internal.reset();
  s["A"] = {a};
  EXPECT_THROW(impute(s, FillStrategy::kImputeMean), Error);
}

TEST(MakeSplit, Ratios) {
  const auto s = make_split(1000, SplitMode::kChronological);
  EXPECT_EQ(s.train_idx.size(), 700u);
  EXPECT_EQ(s.val_idx.size(), 150u);
  EXPECT_EQ(s.test_idx.size(), 150u);
  const auto ten = make_split(10, SplitMode::kChronological);
  EXPECT_EQ(ten.train_idx.size(), 7u);
  EXPECT_EQ(ten.val_idx.size(), 1u);
  EXPECT_EQ(ten.test_idx.size(), 2u);
  EXPECT_EQ(ten.train_idx.back(), 6u);
  EXPECT_EQ(ten.val_idx.front(), 7u);
  EXPECT_THROW(make_split(2, SplitMode::kChronological), Error);
}

TEST(MakeSplit, PartitionProperty) {
  for (std::size_t n = 3; n < 400; n += 7) {
    for (auto mode : {SplitMode::kChronological, SplitMode::kRandom}) {
      const auto s = make_split(n, mode, n);
      std::vector<int> hits(n, 0);
      for (const auto* part : {&s.train_idx, &s.val_idx, &s.test_idx}) {
        for (auto i : *part) ++hits[i];
      }
      EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; })) << n;
      EXPECT_EQ(s.train_idx.size(), n * 7 / 10);
    }
  }
}

TEST(MakeSplit, RandomIsSeeded) {
  const auto a = make_split(100, SplitMode::kRandom, 9);
  const auto b = make_split(100, SplitMode::kRandom, 9);
  const auto c = make_split(100, SplitMode::kRandom, 10);
  EXPECT_EQ(a.test_idx, b.test_idx);
  EXPECT_NE(a.test_idx, c.test_idx);
}

TEST(MatrixCsv, RoundTripIsExact) {
  SensorSeries s;
  s["A"] = {record("A", 0, 1.0 / 3.0, 0.1), record("A", 3600, 2.0, 7.0)};
  const auto m = build_features(s, TargetMode::kOffset);
  const auto back = read_matrix_csv(write_matrix_csv(m), TargetMode::kOffset);
  EXPECT_EQ(back.values, m.values);
  EXPECT_EQ(back.labels, m.labels);
  EXPECT_EQ(back.sensor_ids, m.sensor_ids);
  EXPECT_EQ(back.timestamps, m.timestamps);
  EXPECT_EQ(back.feature_names, m.feature_names);
}

TEST(SplitCsv, RoundTripAndCoverage) {
  const auto s = make_split(20, SplitMode::kRandom, 1);
  const auto back = read_split_csv(write_split_csv(s), 20);
  EXPECT_EQ(back.train_idx, s.train_idx);
  EXPECT_EQ(back.val_idx, s.val_idx);
  EXPECT_EQ(back.test_idx, s.test_idx);
  EXPECT_THROW(read_split_csv("index,partition\n0,train\n", 2), Error);
}

TEST(KernelLayout, OneMatrixPerSensor) {
  const auto s = series_with_lengths({{"A", 4}, {"B", 4}});
  const auto ms = build_kernel_features(s, TargetMode::kOffset);
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(ms[0].num_features(), 14u);
  EXPECT_EQ(ms[0].feature_names[7], "B:raw_pm25");
  EXPECT_EQ(ms[0].num_rows(), 4u);
  EXPECT_EQ(ms[1].labels, (std::vector<double>{1, 1, 1, 1}));
}

}  // namespace
}  // namespace aqcal::preprocess
