#include "aqcal/ingest.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "aqcal/error.hpp"

namespace aqcal::ingest {
namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected aqcal::Error";
  return ErrorKind::kIo;
}

TEST(ParseCsv, MinimalTable) {
  const RawTable t = parse_csv("a,b\n1,2\n");
  EXPECT_EQ(t.column_names, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.num_rows(), 1u);
  EXPECT_EQ(std::get<double>(t.rows[0][0]), 1.0);
  EXPECT_EQ(std::get<double>(t.rows[0][1]), 2.0);
}

TEST(ParseCsv, RaggedRowReportsLine) {
  try {
    parse_csv("a,b\n1,,\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("3 cells vs 2 headers"), std::string::npos);
  }
}

TEST(ParseCsv, DuplicateHeaderIsSchemaError) {
  EXPECT_EQ(kind_of([] { parse_csv("a,a\n1,2\n"); }), ErrorKind::kSchema);
}

TEST(ParseCsv, MissingQuotedAndCrlf) {
  const RawTable t = parse_csv("id,x,note\r\n\"7\",,\"a, \"\"b\"\"\"\r\nS1,NA,3.5e1\r\n");
  ASSERT_EQ(t.num_rows(), 2u);
  EXPECT_EQ(std::get<std::string>(t.rows[0][0]), "7");  // quoted stays text
  EXPECT_TRUE(is_missing(t.rows[0][1]));
  EXPECT_EQ(std::get<std::string>(t.rows[0][2]), "a, \"b\"");
  EXPECT_TRUE(is_missing(t.rows[1][1]));
  EXPECT_EQ(std::get<double>(t.rows[1][2]), 35.0);
}

TEST(ParseCsv, LocaleCommaIsText) {
  const RawTable t = parse_csv("x\n\"1,5\"\n1.5\n");
  EXPECT_TRUE(std::holds_alternative<std::string>(t.rows[0][0]));
  EXPECT_EQ(std::get<double>(t.rows[1][0]), 1.5);
}

TEST(ParseCsv, CalibrationHeaderAccepted) {
  const std::string csv =
      "sensor_id,date,OPCN3PM25,Ref.PM2.5,longitude,latitude,SHT31TI,SHT31TE,SHT31HI,SHT31HE\n"
      "A,2020-01-01T00:00:00Z,10,12,4.4,51.2,20,15,40,55\n";
  const auto recs = to_records(parse_csv(csv));
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].raw_pm25, 10.0);
  EXPECT_EQ(recs[0].ref_pm25, 12.0);
  EXPECT_EQ(recs[0].hum_external, 55.0);
  EXPECT_EQ(recs[0].timestamp, 1577836800);
}

TEST(ParseCsv, RoundTripProperty) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int trial = 0; trial < 20; ++trial) {
    RawTable t;
    t.column_names = {"n", "text", "maybe"};
    for (int r = 0; r < 30; ++r) {
      std::vector<Cell> row;
      row.emplace_back(u(gen) / 7.0);
      row.emplace_back(std::string(r % 3 == 0 ? "with,comma \"q\"" : "plain") +
                       std::to_string(r));
      if (r % 4 == 0) row.emplace_back(std::monostate{});
      else row.emplace_back(static_cast<double>(r));
      t.rows.push_back(std::move(row));
    }
    EXPECT_EQ(parse_csv(write_csv(t)), t);
  }
}

// Schema for files that carry only id, time and position.
Schema bare() {
  Schema s;
  s.raw_pm25 = s.ref_pm25 = s.temp_internal = s.temp_external = s.hum_internal =
      s.hum_external = "";
  return s;
}

std::string two_rows(const char* t1, const char* t2) {
  return std::string("sensor_id,date,longitude,latitude\n") + "A," + t1 + ",4.4,51.2\nA," + t2 +
         ",4.4,51.2\n";
}

TEST(ToRecords, AscendingKeptInOrder) {
  const auto recs = to_records(parse_csv(two_rows("100", "200")), bare());
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].timestamp, 100);
  EXPECT_EQ(recs[1].timestamp, 200);
}

TEST(ToRecords, OutOfOrderIsSorted) {
  const auto recs = to_records(parse_csv(two_rows("200", "100")), bare());
  EXPECT_EQ(recs[0].timestamp, 100);
  EXPECT_EQ(recs[1].timestamp, 200);
}

TEST(ToRecords, DuplicateTimestampIsIntegrityError) {
  EXPECT_EQ(kind_of([] { to_records(parse_csv(two_rows("100", "100")), bare()); }),
            ErrorKind::kIntegrity);
}

TEST(ToRecords, UnparseableTimestampIsRowError) {
  EXPECT_EQ(kind_of([] { to_records(parse_csv(two_rows("100", "yesterday")), bare()); }),
            ErrorKind::kRow);
  EXPECT_EQ(kind_of([] { to_records(parse_csv(two_rows("100", "12.5")), bare()); }), ErrorKind::kRow);
}

TEST(ToRecords, CoordinateAndHumidityRanges) {
  Schema hum = bare();
  hum.hum_external = "SHT31HE";
  EXPECT_EQ(kind_of([] {
              to_records(parse_csv("sensor_id,date,longitude,latitude\nA,1,181,0\n"), bare());
            }),
            ErrorKind::kRow);
  EXPECT_EQ(kind_of([] {
              to_records(parse_csv("sensor_id,date,longitude,latitude\nA,1,0,-91\n"), bare());
            }),
            ErrorKind::kRow);
  EXPECT_EQ(kind_of([&] {
              to_records(parse_csv("sensor_id,date,longitude,latitude,SHT31HE\nA,1,0,0,121\n"), hum);
            }),
            ErrorKind::kRow);
  // 120 %RH is still accepted (sensors over-read).
  EXPECT_NO_THROW(to_records(parse_csv("sensor_id,date,longitude,latitude,SHT31HE\nA,1,0,0,120\n"), hum));
}

TEST(ToRecords, MissingRequiredColumnIsSchemaError) {
  EXPECT_EQ(kind_of([] { to_records(parse_csv("sensor_id,date,longitude\nA,1,0\n")); }),
            ErrorKind::kSchema);
}

TEST(ToRecords, SchemaBindsCustomNamesAndDefaultSensor) {
  Schema s;
  s.sensor_id.clear();
  s.default_sensor_id = "ANT_01";
  s.timestamp = "time";
  s.temp_internal.clear();
  s.temp_external.clear();
  s.hum_internal.clear();
  s.hum_external.clear();
  const auto recs = to_records(
      parse_csv("time,OPCN3PM25,Ref.PM2.5,longitude,latitude\n2021-03-04 05:06,3,4,1,2\n"), s);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].sensor_id, "ANT_01");
  EXPECT_EQ(recs[0].timestamp, parse_timestamp("2021-03-04T05:06:00Z"));
  EXPECT_FALSE(recs[0].hum_external.has_value());
}

TEST(ToRecords, PermutationInvariant) {
  std::string body;
  for (int s = 0; s < 3; ++s) {
    for (int t = 0; t < 8; ++t) {
      body += "S" + std::to_string(s) + "," + std::to_string(1000 + 60 * t) + ",4.4,51.2," +
              std::to_string(t * s) + "\n";
    }
  }
  std::vector<std::string> lines;
  for (std::size_t pos = 0; pos < body.size();) {
    const auto nl = body.find('\n', pos);
    lines.push_back(body.substr(pos, nl - pos + 1));
    pos = nl + 1;
  }
  const std::string header = "sensor_id,date,longitude,latitude,OPCN3PM25\n";
  Schema s;
  s.ref_pm25 = s.temp_internal = s.temp_external = s.hum_internal = s.hum_external = "";
  std::string joined = header;
  for (const auto& l : lines) joined += l;
  const auto expected = to_records(parse_csv(joined), s);
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(lines.begin(), lines.end(), gen);
    std::string shuffled = header;
    for (const auto& l : lines) shuffled += l;
    EXPECT_EQ(to_records(parse_csv(shuffled), s), expected);
  }
}

TEST(Timestamp, Formats) {
  EXPECT_EQ(parse_timestamp("1577836800"), 1577836800);
  EXPECT_EQ(parse_timestamp("2020-01-01"), 1577836800);
  EXPECT_EQ(parse_timestamp("2020-01-01T01:00:00+01:00"), 1577836800);
  EXPECT_EQ(parse_timestamp("2020-01-01 00:00:30"), 1577836830);
  EXPECT_FALSE(parse_timestamp("2020-02-30").has_value());
  EXPECT_FALSE(parse_timestamp("2020-01-01T25:00").has_value());
  EXPECT_EQ(format_timestamp(1577836800), "2020-01-01T00:00:00Z");
  EXPECT_EQ(parse_timestamp(format_timestamp(1234567890)), 1234567890);
}

TEST(ToTable, RecordsRoundTrip) {
  SensorRecord r;
  r.sensor_id = "X";
  r.timestamp = 1600000000;
  r.raw_pm25 = 11.25;
  r.longitude = 10.75;
  r.latitude = 59.9;
  r.hum_internal = 40.0;
  const std::vector<SensorRecord> in{r};
  EXPECT_EQ(to_records(parse_csv(write_csv(to_table(in)))), in);
}

}  // namespace
}  // namespace aqcal::ingest
