#include "edgepipe/preprocess/sensor_clean.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <unordered_set>

#include "edgepipe/common/time_util.hpp"

namespace edgepipe {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::optional<double> parse_number(const std::string& text) {
  double v = 0.0;
  const char* b = text.data();
  const char* e = b + text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
  if (b < e && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) return std::nullopt;
  return v;
}

}  // namespace

SensorCleanResult clean_sensor(const CsvTable& raw, const StationCodes& codes) {
  // Column lookup is case-insensitive (the source data used magnetic_X).
  const auto& columns = sample_columns();
  std::vector<std::optional<std::size_t>> pos(kSampleColumnCount);
  for (std::size_t c = 0; c < kSampleColumnCount; ++c) {
    for (std::size_t h = 0; h < raw.header.size(); ++h) {
      if (lower(raw.header[h]) == columns[c]) {
        pos[c] = h;
        break;
      }
    }
  }

  SensorCleanResult out;
  out.stats.input_rows = raw.rows.size();
  out.features.id_column = "sample_id";
  out.features.column_names.push_back("station");
  out.features.column_names.push_back("time_at");
  for (std::size_t f = 0; f < kNumSensorFields; ++f) {
    out.features.column_names.emplace_back(sensor_field_name(static_cast<SensorField>(f)));
  }
  out.features.values = Matrix(0, out.features.column_names.size());

  // Step 1: every row becomes 21 non-null strings.
  std::vector<std::vector<std::string>> rows;
  rows.reserve(raw.rows.size());
  for (const auto& r : raw.rows) {
    std::vector<std::string> filled(kSampleColumnCount, "0");
    for (std::size_t c = 0; c < kSampleColumnCount; ++c) {
      if (pos[c] && *pos[c] < r.size() && r[*pos[c]]) filled[c] = *r[*pos[c]];
    }
    rows.push_back(std::move(filled));
  }

  // Step 2.
  std::unordered_set<std::string> seen;
  std::vector<std::size_t> first_index;
  std::map<std::string, std::size_t> first_of;
  std::vector<std::vector<std::string>> unique;
  for (auto& r : rows) {
    if (!seen.insert(r[0]).second) {
      out.dedup_ids.push_back(r[0]);
      ++out.stats.duplicates;
      continue;
    }
    first_of[r[0]] = unique.size();
    unique.push_back(std::move(r));
  }
  for (const auto& id : out.dedup_ids) {
    const auto& r = unique[first_of[id]];
    SensorSample s;
    s.sample_id = r[0];
    s.station = r[1];
    s.time_at = r[2];
    s.ts = static_cast<std::int64_t>(parse_number(r[3]).value_or(0.0));
    for (std::size_t f = 0; f < kNumSensorFields; ++f) s.readings[f] = parse_number(r[4 + f]).value_or(0.0);
    out.dedup_kept.emplace(id, s);
  }

  std::array<double, kNumSensorFields> readings{};
  for (const auto& r : unique) {
    bool numeric = true;
    for (std::size_t f = 0; f < kNumSensorFields && numeric; ++f) {
      const auto v = parse_number(r[4 + f]);
      if (!v) numeric = false;
      else readings[f] = *v;
    }
    if (!numeric) {
      ++out.stats.bad_value;
      continue;
    }
    // Step 3.
    if (readings[static_cast<std::size_t>(SensorField::magnetic_x)] == 0.0 &&
        readings[static_cast<std::size_t>(SensorField::magnetic_y)] == 0.0 &&
        readings[static_cast<std::size_t>(SensorField::magnetic_z)] == 0.0) {
      ++out.stats.zero_magnetic;
      continue;
    }
    // Step 4.
    double station = 0.0;
    if (r[1] == codes.garage || r[1] == "0") {
      station = 0.0;
    } else if (r[1] == codes.bedroom || r[1] == "1") {
      station = 1.0;
    } else {
      ++out.stats.unknown_station;
      continue;
    }
    // Step 5.
    const auto epoch = parse_epoch_seconds(r[2]);
    if (!epoch) {
      ++out.stats.bad_time;
      continue;
    }
    // Steps 6 and 7: ts is never copied; rows are appended densely.
    std::vector<double> row;
    row.reserve(2 + kNumSensorFields);
    row.push_back(station);
    row.push_back(static_cast<double>(*epoch));
    row.insert(row.end(), readings.begin(), readings.end());
    out.features.values.append_row(row);
    out.features.row_ids.push_back(r[0]);
  }
  out.dropped = out.stats.bad_value + out.stats.zero_magnetic + out.stats.unknown_station + out.stats.bad_time;
  out.features.provenance = "clean_sensor(" + std::to_string(out.stats.input_rows) + " rows)";
  return out;
}

CsvTable samples_to_table(const std::vector<SensorSample>& samples) {
  CsvTable t;
  for (auto c : sample_columns()) t.header.emplace_back(c);
  t.rows.reserve(samples.size());
  for (const auto& s : samples) {
    CsvRow row;
    for (auto& f : sample_to_fields(s)) row.emplace_back(std::move(f));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable cleaned_to_table(const FeatureMatrix& cleaned) {
  CsvTable t;
  t.header.push_back(cleaned.id_column);
  t.header.insert(t.header.end(), cleaned.column_names.begin(), cleaned.column_names.end());
  for (std::size_t r = 0; r < cleaned.rows(); ++r) {
    CsvRow row;
    row.emplace_back(cleaned.row_ids[r]);
    for (std::size_t c = 0; c < cleaned.cols(); ++c) {
      const double v = cleaned.values(r, c);
      // time_at as an integer so it re-parses as epoch seconds.
      if (cleaned.column_names[c] == "time_at" || cleaned.column_names[c] == "station") {
        row.emplace_back(std::to_string(static_cast<std::int64_t>(v)));
      } else {
        row.emplace_back(format_double(v));
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::string> sensor_feature_names() {
  std::vector<std::string> names;
  for (std::size_t f = 0; f < kNumSensorFields; ++f) {
    names.emplace_back(sensor_field_name(static_cast<SensorField>(f)));
  }
  return names;
}

FeatureMatrix sensor_model_features(const FeatureMatrix& cleaned) {
  return cleaned.select_columns(sensor_feature_names());
}

std::vector<double> sample_feature_vector(const SensorSample& s) {
  return {s.readings.begin(), s.readings.end()};
}

}  // namespace edgepipe
