#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace aqcal::ingest {

// A cell is missing, a real, or text. Quoted fields are always text.
using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

struct RawTable {
  std::vector<std::string> column_names;
  std::vector<std::vector<Cell>> rows;

  std::size_t num_rows() const { return rows.size(); }
  // Index of `name` or nullopt.
  std::optional<std::size_t> column_index(std::string_view name) const;

  bool operator==(const RawTable&) const = default;
};

// RFC-4180 style: comma separated, optional double-quoted fields with ""
// escapes, CRLF or LF line endings, one mandatory header line. Empty
// unquoted cells (and the literals NA / NaN) are missing; unquoted cells that
// parse fully as a finite real are numeric; everything else is text.
RawTable parse_csv(std::istream& in);
RawTable parse_csv(std::string_view text);

// Inverse of parse_csv: numbers in shortest round-trip form, text always
// quoted, missing as an empty cell.
std::string write_csv(const RawTable& table);

struct SensorRecord {
  std::string sensor_id;
  std::int64_t timestamp = 0;  // seconds since the Unix epoch, UTC
  std::optional<double> raw_pm25;
  std::optional<double> ref_pm25;
  double longitude = 0.0;
  double latitude = 0.0;
  std::optional<double> temp_internal;
  std::optional<double> temp_external;
  std::optional<double> hum_internal;
  std::optional<double> hum_external;

  bool operator==(const SensorRecord&) const = default;
};

// Binds record fields to CSV column names. The defaults follow the
// SensEURCity vocabulary. An empty optional-channel name means the channel is
// absent from the file; an empty sensor_id name means every row belongs to
// `default_sensor_id` (one file per deployment).
struct Schema {
  std::string sensor_id = "sensor_id";
  std::string timestamp = "date";
  std::string raw_pm25 = "OPCN3PM25";
  std::string ref_pm25 = "Ref.PM2.5";
  std::string longitude = "longitude";
  std::string latitude = "latitude";
  std::string temp_internal = "SHT31TI";
  std::string temp_external = "SHT31TE";
  std::string hum_internal = "SHT31HI";
  std::string hum_external = "SHT31HE";
  std::string default_sensor_id = "sensor";

  // Field name ("raw_pm25", ...) -> column name, for config files.
  void set(std::string_view field, std::string column);
};

// Records sorted by (sensor_id, timestamp). Throws kRow for unparseable
// timestamps, non-numeric readings or out-of-range coordinates/humidity,
// kIntegrity for a repeated (sensor_id, timestamp) pair and kSchema when a
// required column is absent.
std::vector<SensorRecord> to_records(const RawTable& table, const Schema& schema = {});

// Table with the schema's columns, one row per record, timestamps written as
// ISO-8601 UTC text. to_records(to_table(r)) == r for valid records.
RawTable to_table(const std::vector<SensorRecord>& records, const Schema& schema = {});

using SensorSeries = std::map<std::string, std::vector<SensorRecord>>;

// Groups sorted records by sensor_id, keeping time order.
SensorSeries group_by_sensor(const std::vector<SensorRecord>& records);

// Accepts integer epoch seconds or ISO-8601 "YYYY-MM-DD", "YYYY-MM-DD hh:mm",
// "YYYY-MM-DDThh:mm:ss" with an optional "Z" or "+hh:mm"/"-hh:mm" suffix.
std::optional<std::int64_t> parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t epoch_seconds);

}  // namespace aqcal::ingest
