#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace edgepipe {

// The 17 numeric readings of a Sense HAT(B) sample, in wire/CSV order.
enum class SensorField : std::size_t {
  temperature,
  humidity,
  pressure,
  lux,
  color_r,
  color_g,
  color_b,
  color_temp,
  accel_x,
  accel_y,
  accel_z,
  gyro_x,
  gyro_y,
  gyro_z,
  magnetic_x,
  magnetic_y,
  magnetic_z,
};

inline constexpr std::size_t kNumSensorFields = 17;

struct FieldRange {
  double lo;
  double hi;
};

std::string_view sensor_field_name(SensorField f);
std::optional<SensorField> sensor_field_from_name(std::string_view name);
// Physical range of each reading; generated samples are clamped into it.
FieldRange sensor_field_range(SensorField f);

// One telemetry record. 21 columns on the wire: the three identity
// columns, the gateway ingest timestamp `ts` and the 17 readings.
struct SensorSample {
  std::string sample_id;
  std::string station;
  std::string time_at;  // ISO 8601 UTC
  std::int64_t ts = 0;  // ingest time (epoch seconds); 0 until stamped
  std::array<double, kNumSensorFields> readings{};

  double& at(SensorField f) { return readings[static_cast<std::size_t>(f)]; }
  double at(SensorField f) const { return readings[static_cast<std::size_t>(f)]; }

  friend bool operator==(const SensorSample&, const SensorSample&) = default;
};

inline constexpr std::size_t kSampleColumnCount = 21;
const std::array<std::string_view, kSampleColumnCount>& sample_columns();

bool in_range(const SensorSample& s);

nlohmann::ordered_json sample_to_json(const SensorSample& s);
// Throws DataError when a field is missing or mistyped.
SensorSample sample_from_json(const nlohmann::json& j);

// Fields in sample_columns() order, numbers in round-trip form.
std::vector<std::string> sample_to_fields(const SensorSample& s);
std::string sample_to_csv_line(const SensorSample& s);
SensorSample sample_from_fields(const std::vector<std::string>& fields);

// sample_batch payload: {"samples": [sample_to_json...]}.
std::string samples_to_batch_payload(const std::vector<SensorSample>& samples);
std::vector<SensorSample> samples_from_batch_payload(std::string_view payload);

}  // namespace edgepipe
