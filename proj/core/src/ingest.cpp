#include "aqcal/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <iterator>
#include <set>
#include <sstream>
#include <tuple>

#include "aqcal/error.hpp"
#include "aqcal/format.hpp"

namespace aqcal::ingest {
namespace {

struct Field {
  std::string text;
  bool quoted = false;
};

Cell to_cell(const Field& f) {
  if (f.quoted) return f.text;
  if (f.text.empty() || f.text == "NA" || f.text == "NaN" || f.text == "nan") {
    return std::monostate{};
  }
  double v = 0.0;
  if (parse_real(f.text, v)) return v;
  return f.text;
}

// Splits the whole document into records of fields. Each record carries the
// 1-based line on which it starts.
class CsvLexer {
 public:
  explicit CsvLexer(std::string_view text) : text_(text) {}

  // Returns false at end of input.
  bool next_record(std::vector<Field>& fields, std::size_t& line_no) {
    fields.clear();
    // Blank lines between records are skipped.
    while (pos_ < text_.size() && (text_[pos_] == '\n' || text_[pos_] == '\r')) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
    if (pos_ >= text_.size()) return false;
    line_no = line_;
    Field field;
    while (true) {
      if (pos_ >= text_.size()) {
        fields.push_back(std::move(field));
        return true;
      }
      const char c = text_[pos_];
      if (c == '"' && field.text.empty() && !field.quoted) {
        field.quoted = true;
        ++pos_;
        read_quoted(field.text);
        continue;
      }
      if (c == ',') {
        fields.push_back(std::move(field));
        field = Field{};
        ++pos_;
        continue;
      }
      if (c == '\r' || c == '\n') {
        if (c == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') ++pos_;
        ++pos_;
        ++line_;
        fields.push_back(std::move(field));
        return true;
      }
      if (field.quoted) {
        fail(ErrorKind::kParse, "line " + std::to_string(line_) +
                                    ": unexpected character after closing quote");
      }
      field.text.push_back(c);
      ++pos_;
    }
  }

 private:
  void read_quoted(std::string& out) {
    const std::size_t start_line = line_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_++];
      if (c == '"') {
        if (pos_ < text_.size() && text_[pos_] == '"') {
          out.push_back('"');
          ++pos_;
          continue;
        }
        return;
      }
      if (c == '\n') ++line_;
      out.push_back(c);
    }
    fail(ErrorKind::kParse,
         "line " + std::to_string(start_line) + ": unterminated quoted field");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

void append_quoted(std::string& out, std::string_view text) {
  out.push_back('"');
  for (char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

std::string row_context(std::size_t row) { return "row " + std::to_string(row + 1); }

}  // namespace

std::optional<std::size_t> RawTable::column_index(std::string_view name) const {
  const auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - column_names.begin());
}

RawTable parse_csv(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  CsvLexer lexer(text);
  std::vector<Field> fields;
  std::size_t line_no = 0;
  if (!lexer.next_record(fields, line_no)) {
    fail(ErrorKind::kParse, "missing header line");
  }
  RawTable table;
  std::set<std::string> seen;
  for (auto& f : fields) {
    if (!seen.insert(f.text).second) {
      fail(ErrorKind::kSchema, "duplicate column name '" + f.text + "'");
    }
    table.column_names.push_back(std::move(f.text));
  }
  const std::size_t width = table.column_names.size();
  while (lexer.next_record(fields, line_no)) {
    if (fields.size() != width) {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " +
                                  std::to_string(fields.size()) + " cells vs " +
                                  std::to_string(width) + " headers");
    }
    std::vector<Cell> row;
    row.reserve(width);
    for (const auto& f : fields) row.push_back(to_cell(f));
    table.rows.push_back(std::move(row));
  }
  return table;
}

RawTable parse_csv(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail(ErrorKind::kIo, "failed reading CSV stream");
  return parse_csv(std::string_view(buf.str()));
}

std::string write_csv(const RawTable& table) {
  std::string out;
  for (std::size_t j = 0; j < table.column_names.size(); ++j) {
    if (j) out.push_back(',');
    append_quoted(out, table.column_names[j]);
  }
  out.push_back('\n');
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out.push_back(',');
      const Cell& c = row[j];
      if (const auto* v = std::get_if<double>(&c)) {
        out += format_real(*v);
      } else if (const auto* s = std::get_if<std::string>(&c)) {
        append_quoted(out, *s);
      }
    }
    out.push_back('\n');
  }
  return out;
}

void Schema::set(std::string_view field, std::string column) {
  if (field == "sensor_id") sensor_id = std::move(column);
  else if (field == "timestamp") timestamp = std::move(column);
  else if (field == "raw_pm25") raw_pm25 = std::move(column);
  else if (field == "ref_pm25") ref_pm25 = std::move(column);
  else if (field == "longitude") longitude = std::move(column);
  else if (field == "latitude") latitude = std::move(column);
  else if (field == "temp_internal") temp_internal = std::move(column);
  else if (field == "temp_external") temp_external = std::move(column);
  else if (field == "hum_internal") hum_internal = std::move(column);
  else if (field == "hum_external") hum_external = std::move(column);
  else if (field == "default_sensor_id") default_sensor_id = std::move(column);
  else fail(ErrorKind::kConfig, "unknown schema field '" + std::string(field) + "'");
}

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  if (text.empty()) return std::nullopt;

  auto read_int = [&](std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    const char* first = text.data() + pos;
    if (!std::all_of(first, first + len, [](char c) { return c >= '0' && c <= '9'; })) {
      return false;
    }
    std::from_chars(first, first + len, out);
    return true;
  };

  // Plain integer epoch seconds.
  {
    std::int64_t v = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && ptr == last) return v;
  }

  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!read_int(0, 4, y) || text.size() < 10 || text[4] != '-' || !read_int(5, 2, mo) ||
      text[7] != '-' || !read_int(8, 2, d)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  std::size_t pos = 10;
  if (pos < text.size()) {
    if (text[pos] != 'T' && text[pos] != ' ') return std::nullopt;
    if (!read_int(pos + 1, 2, h) || pos + 3 >= text.size() || text[pos + 3] != ':' ||
        !read_int(pos + 4, 2, mi)) {
      return std::nullopt;
    }
    pos += 6;
    if (pos < text.size() && text[pos] == ':') {
      if (!read_int(pos + 1, 2, s)) return std::nullopt;
      pos += 3;
    }
    if (h > 23 || mi > 59 || s > 60) return std::nullopt;
  }
  std::int64_t offset = 0;
  if (pos < text.size()) {
    if (text[pos] == 'Z' && pos + 1 == text.size()) {
      pos += 1;
    } else if ((text[pos] == '+' || text[pos] == '-') && pos + 6 == text.size() &&
               text[pos + 3] == ':') {
      int oh = 0, om = 0;
      if (!read_int(pos + 1, 2, oh) || !read_int(pos + 4, 2, om)) return std::nullopt;
      offset = (text[pos] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
      pos = text.size();
    } else {
      return std::nullopt;
    }
  }
  const auto days = sys_days(ymd).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s - offset;
}

std::string format_timestamp(std::int64_t epoch_seconds) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{epoch_seconds}};
  const auto day_point = floor<days>(tp);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{tp - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::vector<SensorRecord> to_records(const RawTable& table, const Schema& schema) {
  auto required = [&](const std::string& name, const char* field) {
    const auto idx = table.column_index(name);
    if (!idx) {
      fail(ErrorKind::kSchema,
           std::string("column '") + name + "' for field " + field + " not found");
    }
    return *idx;
  };
  auto optional_col = [&](const std::string& name) -> std::optional<std::size_t> {
    if (name.empty()) return std::nullopt;
    const auto idx = table.column_index(name);
    if (!idx) fail(ErrorKind::kSchema, "column '" + name + "' not found");
    return idx;
  };

  const auto id_col = optional_col(schema.sensor_id);
  const std::size_t ts_col = required(schema.timestamp, "timestamp");
  const std::size_t lon_col = required(schema.longitude, "longitude");
  const std::size_t lat_col = required(schema.latitude, "latitude");
  const auto raw_col = optional_col(schema.raw_pm25);
  const auto ref_col = optional_col(schema.ref_pm25);
  const auto ti_col = optional_col(schema.temp_internal);
  const auto te_col = optional_col(schema.temp_external);
  const auto hi_col = optional_col(schema.hum_internal);
  const auto he_col = optional_col(schema.hum_external);

  std::vector<SensorRecord> out;
  out.reserve(table.num_rows());
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    const auto& row = table.rows[r];
    auto number = [&](std::optional<std::size_t> col,
                      const char* field) -> std::optional<double> {
      if (!col) return std::nullopt;
      const Cell& c = row[*col];
      if (is_missing(c)) return std::nullopt;
      if (const auto* v = std::get_if<double>(&c)) return *v;
      double v = 0.0;
      if (parse_real(std::get<std::string>(c), v)) return v;
      fail(ErrorKind::kRow, row_context(r) + ": non-numeric " + field);
    };

    SensorRecord rec;
    if (id_col) {
      const Cell& c = row[*id_col];
      if (is_missing(c)) fail(ErrorKind::kRow, row_context(r) + ": missing sensor_id");
      if (const auto* s = std::get_if<std::string>(&c)) {
        rec.sensor_id = *s;
      } else {
        // Numeric ids keep their source spelling.
        std::string s_id = format_real(std::get<double>(c));
        if (s_id.ends_with(".0")) s_id.resize(s_id.size() - 2);
        rec.sensor_id = s_id;
      }
    } else {
      rec.sensor_id = schema.default_sensor_id;
    }

    const Cell& ts = row[ts_col];
    std::optional<std::int64_t> stamp;
    if (const auto* v = std::get_if<double>(&ts)) {
      if (std::floor(*v) == *v && std::abs(*v) < 9.2e18) stamp = static_cast<std::int64_t>(*v);
    } else if (const auto* s = std::get_if<std::string>(&ts)) {
      stamp = parse_timestamp(*s);
    }
    if (!stamp) fail(ErrorKind::kRow, row_context(r) + ": unparseable timestamp");
    rec.timestamp = *stamp;

    const auto lon = number(lon_col, "longitude");
    const auto lat = number(lat_col, "latitude");
    if (!lon || !lat) fail(ErrorKind::kRow, row_context(r) + ": missing coordinates");
    if (*lon < -180.0 || *lon > 180.0) {
      fail(ErrorKind::kRow, row_context(r) + ": longitude out of [-180, 180]");
    }
    if (*lat < -90.0 || *lat > 90.0) {
      fail(ErrorKind::kRow, row_context(r) + ": latitude out of [-90, 90]");
    }
    rec.longitude = *lon;
    rec.latitude = *lat;
    rec.raw_pm25 = number(raw_col, "raw_pm25");
    rec.ref_pm25 = number(ref_col, "ref_pm25");
    rec.temp_internal = number(ti_col, "temp_internal");
    rec.temp_external = number(te_col, "temp_external");
    rec.hum_internal = number(hi_col, "hum_internal");
    rec.hum_external = number(he_col, "hum_external");
    for (const auto& hum : {rec.hum_internal, rec.hum_external}) {
      if (hum && (*hum < 0.0 || *hum > 120.0)) {
        fail(ErrorKind::kRow, row_context(r) + ": humidity out of [0, 120]");
      }
    }
    out.push_back(std::move(rec));
  }

  std::sort(out.begin(), out.end(), [](const SensorRecord& a, const SensorRecord& b) {
    return std::tie(a.sensor_id, a.timestamp) < std::tie(b.sensor_id, b.timestamp);
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].sensor_id == out[i - 1].sensor_id && out[i].timestamp == out[i - 1].timestamp) {
      fail(ErrorKind::kIntegrity, "duplicate timestamp " + std::to_string(out[i].timestamp) +
                                      " for sensor '" + out[i].sensor_id + "'");
    }
  }
  return out;
}

RawTable to_table(const std::vector<SensorRecord>& records, const Schema& schema) {
  RawTable table;
  const bool with_id = !schema.sensor_id.empty();
  if (with_id) table.column_names.push_back(schema.sensor_id);
  table.column_names.push_back(schema.timestamp);
  using Getter = std::optional<double> SensorRecord::*;
  std::vector<Getter> optional_fields;
  auto add_optional = [&](const std::string& name, Getter g) {
    if (name.empty()) return;
    table.column_names.push_back(name);
    optional_fields.push_back(g);
  };
  add_optional(schema.raw_pm25, &SensorRecord::raw_pm25);
  add_optional(schema.ref_pm25, &SensorRecord::ref_pm25);
  table.column_names.push_back(schema.longitude);
  table.column_names.push_back(schema.latitude);
  const std::size_t pm_fields = optional_fields.size();
  add_optional(schema.temp_internal, &SensorRecord::temp_internal);
  add_optional(schema.temp_external, &SensorRecord::temp_external);
  add_optional(schema.hum_internal, &SensorRecord::hum_internal);
  add_optional(schema.hum_external, &SensorRecord::hum_external);

  auto to_cell_value = [](const std::optional<double>& v) -> Cell {
    if (v) return *v;
    return std::monostate{};
  };
  for (const auto& rec : records) {
    std::vector<Cell> row;
    if (with_id) row.emplace_back(rec.sensor_id);
    row.emplace_back(format_timestamp(rec.timestamp));
    for (std::size_t i = 0; i < pm_fields; ++i) row.push_back(to_cell_value(rec.*optional_fields[i]));
    row.emplace_back(rec.longitude);
    row.emplace_back(rec.latitude);
    for (std::size_t i = pm_fields; i < optional_fields.size(); ++i) {
      row.push_back(to_cell_value(rec.*optional_fields[i]));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

SensorSeries group_by_sensor(const std::vector<SensorRecord>& records) {
  SensorSeries out;
  for (const auto& rec : records) out[rec.sensor_id].push_back(rec);
  for (auto& [id, series] : out) {
    std::stable_sort(series.begin(), series.end(),
                     [](const SensorRecord& a, const SensorRecord& b) {
                       return a.timestamp < b.timestamp;
                     });
  }
  return out;
}

}  // namespace aqcal::ingest
