#include "edgepipe/sensor/sample.hpp"

#include <charconv>
#include <sstream>

#include "edgepipe/common/csv.hpp"
#include "edgepipe/common/errors.hpp"

namespace edgepipe {

namespace {

constexpr std::array<std::string_view, kNumSensorFields> kFieldNames = {
    "temperature", "humidity",   "pressure", "lux",     "color_r",    "color_g",
    "color_b",     "color_temp", "accel_x",  "accel_y", "accel_z",    "gyro_x",
    "gyro_y",      "gyro_z",     "magnetic_x", "magnetic_y", "magnetic_z"};

constexpr std::array<FieldRange, kNumSensorFields> kRanges = {{
    {-30.0, 100.0},   // temperature, degC
    {0.0, 100.0},     // humidity, %rH
    {260.0, 1260.0},  // pressure, hPa
    {0.0, 40000.0},   // lux
    {0.0, 4095.0},    // 12-bit color ADC
    {0.0, 4095.0},
    {0.0, 4095.0},
    {0.0, 20000.0},   // color temperature, K
    {-16.0, 16.0},    // g
    {-16.0, 16.0},
    {-16.0, 16.0},
    {-2000.0, 2000.0},  // dps
    {-2000.0, 2000.0},
    {-2000.0, 2000.0},
    {-49.0, 49.0},  // gauss
    {-49.0, 49.0},
    {-49.0, 49.0},
}};

constexpr std::array<std::string_view, kSampleColumnCount> kColumns = {
    "sample_id", "station",    "time_at", "ts",         "temperature", "humidity", "pressure",
    "lux",       "color_r",    "color_g", "color_b",    "color_temp",  "accel_x",  "accel_y",
    "accel_z",   "gyro_x",     "gyro_y",  "gyro_z",     "magnetic_x",  "magnetic_y", "magnetic_z"};

double parse_double(const std::string& s, std::string_view what) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError("sample: field " + std::string(what) + " is not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

std::string_view sensor_field_name(SensorField f) { return kFieldNames[static_cast<std::size_t>(f)]; }

std::optional<SensorField> sensor_field_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kFieldNames.size(); ++i) {
    if (kFieldNames[i] == name) return static_cast<SensorField>(i);
  }
  return std::nullopt;
}

FieldRange sensor_field_range(SensorField f) { return kRanges[static_cast<std::size_t>(f)]; }

const std::array<std::string_view, kSampleColumnCount>& sample_columns() { return kColumns; }

bool in_range(const SensorSample& s) {
  for (std::size_t i = 0; i < kNumSensorFields; ++i) {
    const double v = s.readings[i];
    if (!(v >= kRanges[i].lo && v <= kRanges[i].hi)) return false;
  }
  return true;
}

nlohmann::ordered_json sample_to_json(const SensorSample& s) {
  nlohmann::ordered_json j;
  j["sample_id"] = s.sample_id;
  j["station"] = s.station;
  j["time_at"] = s.time_at;
  j["ts"] = s.ts;
  for (std::size_t i = 0; i < kNumSensorFields; ++i) j[std::string(kFieldNames[i])] = s.readings[i];
  return j;
}

SensorSample sample_from_json(const nlohmann::json& j) {
  try {
    SensorSample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.station = j.at("station").get<std::string>();
    s.time_at = j.at("time_at").get<std::string>();
    s.ts = j.value("ts", std::int64_t{0});
    for (std::size_t i = 0; i < kNumSensorFields; ++i) {
      s.readings[i] = j.at(std::string(kFieldNames[i])).get<double>();
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("sample: ") + e.what());
  }
}

std::vector<std::string> sample_to_fields(const SensorSample& s) {
  std::vector<std::string> out;
  out.reserve(kSampleColumnCount);
  out.push_back(s.sample_id);
  out.push_back(s.station);
  out.push_back(s.time_at);
  out.push_back(std::to_string(s.ts));
  for (double v : s.readings) out.push_back(format_double(v));
  return out;
}

std::string sample_to_csv_line(const SensorSample& s) {
  std::ostringstream out;
  write_csv_row(out, sample_to_fields(s));
  return out.str();
}

SensorSample sample_from_fields(const std::vector<std::string>& f) {
  if (f.size() != kSampleColumnCount) {
    throw DataError("sample: expected 21 fields, got " + std::to_string(f.size()));
  }
  SensorSample s;
  s.sample_id = f[0];
  s.station = f[1];
  s.time_at = f[2];
  s.ts = static_cast<std::int64_t>(parse_double(f[3], "ts"));
  for (std::size_t i = 0; i < kNumSensorFields; ++i) s.readings[i] = parse_double(f[4 + i], kFieldNames[i]);
  return s;
}

std::string samples_to_batch_payload(const std::vector<SensorSample>& samples) {
  nlohmann::ordered_json body;
  body["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : samples) body["samples"].push_back(sample_to_json(s));
  return body.dump();
}

std::vector<SensorSample> samples_from_batch_payload(std::string_view payload) {
  const auto body = nlohmann::json::parse(payload, nullptr, false);
  if (body.is_discarded() || !body.contains("samples") || !body["samples"].is_array()) {
    throw DataError("sample batch: expected {\"samples\": [...]}");
  }
  std::vector<SensorSample> out;
  out.reserve(body["samples"].size());
  for (const auto& j : body["samples"]) out.push_back(sample_from_json(j));
  return out;
}

}  // namespace edgepipe
