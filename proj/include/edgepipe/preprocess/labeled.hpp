#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edgepipe/preprocess/feature_matrix.hpp"
#include "json.hpp"

namespace edgepipe {

// The 13-column labeled event schema, in file order.
inline constexpr std::array<std::string_view, 13> kLabeledColumns = {
    "sourceID",          "sourceAddress",       "sourceType",       "sourceLocation",
    "destinationServiceAddress", "destinationServiceType", "destinationLocation",
    "accessedNodeAddress", "accessedNodeType",  "operation",        "value",
    "timestamp",         "normality"};

// The 11 categorical feature columns (every column but timestamp and
// normality), in file order.
inline constexpr std::size_t kLabeledFeatureCount = 11;
const std::array<std::string_view, kLabeledFeatureCount>& labeled_feature_columns();

struct LabeledEvent {
  std::string id;  // row identity for leakage audits
  std::array<std::optional<std::string>, kLabeledFeatureCount> categorical;
  std::optional<std::int64_t> timestamp;
  std::string normality;
};

// Requires all 13 header names (any order). Throws DataError on a schema
// mismatch or a non-integer timestamp. Row ids are "row<N>" (1-based).
std::vector<LabeledEvent> read_labeled_csv(std::istream& in);
void write_labeled_csv(std::ostream& out, const std::vector<LabeledEvent>& events);

// "normal" -> 0, every other label -> 1.
int normality_code(std::string_view normality);

// Null fills applied before fitting and encoding.
std::string filled_category(std::size_t column, const std::optional<std::string>& value);

// Per-column category -> code maps, codes in lexicographic order.
class LabelEncoder {
 public:
  // Throws std::invalid_argument on empty input.
  static LabelEncoder fit(const std::vector<LabeledEvent>& events);

  // Unseen categories map to cardinality(column).
  std::int64_t encode(std::size_t column, const std::string& category) const;
  // Throws std::out_of_range for a code outside [0, cardinality).
  const std::string& decode(std::size_t column, std::int64_t code) const;
  std::size_t cardinality(std::size_t column) const { return vocab_.at(column).size(); }

  nlohmann::json to_json() const;
  static LabelEncoder from_json(const nlohmann::json& j);

 private:
  std::array<std::vector<std::string>, kLabeledFeatureCount> vocab_;
  std::array<std::map<std::string, std::int64_t>, kLabeledFeatureCount> codes_;
};

struct LabeledData {
  FeatureMatrix features;  // 11 encoded columns + timestamp
  std::vector<int> labels;
};

LabeledData clean_labeled(const std::vector<LabeledEvent>& events, const LabelEncoder& encoder);

}  // namespace edgepipe
