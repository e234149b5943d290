#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "edgepipe/common/csv.hpp"
#include "edgepipe/preprocess/feature_matrix.hpp"
#include "edgepipe/sensor/sample.hpp"

namespace edgepipe {

struct StationCodes {
  std::string garage = "daniel/house/garage/pi3";    // -> 0
  std::string bedroom = "daniel/house/bedroom/pi4";  // -> 1
};

struct SensorCleanStats {
  std::size_t input_rows = 0;
  std::size_t duplicates = 0;
  std::size_t zero_magnetic = 0;
  std::size_t unknown_station = 0;
  std::size_t bad_time = 0;
  std::size_t bad_value = 0;  // a reading that is not a number
};

struct SensorCleanResult {
  // Columns: station, time_at, then the 17 readings. row_ids = sample_id.
  FeatureMatrix features;
  // One entry per removed duplicate row, in input order.
  std::vector<std::string> dedup_ids;
  // The surviving (first) occurrence of each duplicated id after null
  // filling, so a store keyed by sample_id can be made to hold it.
  std::map<std::string, SensorSample> dedup_kept;
  // Rows removed by the magnetic, station and time steps (not duplicates).
  std::size_t dropped = 0;
  SensorCleanStats stats;
};

// The seven cleaning steps, in order:
//   1. nulls -> "0"
//   2. duplicate sample_id: keep the first, collect the rest in dedup_ids
//   3. drop rows whose three magnetic readings are all 0
//   4. station: garage path -> 0, bedroom path -> 1, others dropped
//      (already-encoded "0"/"1" pass through, so cleaning is idempotent)
//   5. time_at -> epoch seconds; unparseable rows dropped and counted
//   6. drop ts
//   7. dense row order
// Columns are located by name; absent columns count as null. Extra
// columns are ignored.
SensorCleanResult clean_sensor(const CsvTable& raw, const StationCodes& codes = {});

CsvTable samples_to_table(const std::vector<SensorSample>& samples);

// Renders a cleaned matrix back into raw-table form (no ts column).
CsvTable cleaned_to_table(const FeatureMatrix& cleaned);

// The model input for the anomaly detector: the 17 readings.
std::vector<std::string> sensor_feature_names();
FeatureMatrix sensor_model_features(const FeatureMatrix& cleaned);
std::vector<double> sample_feature_vector(const SensorSample& s);

}  // namespace edgepipe
