#include "edgepipe/preprocess/labeled.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <stdexcept>

#include "edgepipe/common/csv.hpp"
#include "edgepipe/common/errors.hpp"

namespace edgepipe {

namespace {

constexpr std::size_t kAccessedNodeType = 8;
constexpr std::size_t kValue = 10;

}  // namespace

const std::array<std::string_view, kLabeledFeatureCount>& labeled_feature_columns() {
  static const std::array<std::string_view, kLabeledFeatureCount> cols = [] {
    std::array<std::string_view, kLabeledFeatureCount> c{};
    std::size_t k = 0;
    for (auto name : kLabeledColumns) {
      if (name != "timestamp" && name != "normality") c[k++] = name;
    }
    return c;
  }();
  return cols;
}

std::vector<LabeledEvent> read_labeled_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  std::map<std::string_view, std::size_t> pos;
  for (auto name : kLabeledColumns) {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw DataError("labeled csv: missing column '" + std::string(name) + "'");
    pos[name] = static_cast<std::size_t>(it - t.header.begin());
  }
  if (t.header.size() != kLabeledColumns.size()) {
    throw DataError("labeled csv: expected 13 columns, got " + std::to_string(t.header.size()));
  }
  const auto& feats = labeled_feature_columns();
  std::vector<LabeledEvent> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    LabeledEvent e;
    e.id = "row" + std::to_string(r + 1);
    for (std::size_t c = 0; c < kLabeledFeatureCount; ++c) e.categorical[c] = row[pos[feats[c]]];
    if (const auto& ts = row[pos["timestamp"]]) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(ts->data(), ts->data() + ts->size(), v);
      if (ec != std::errc() || p != ts->data() + ts->size()) {
        throw DataError("labeled csv: row " + std::to_string(r + 1) + ": bad timestamp '" + *ts + "'");
      }
      e.timestamp = v;
    }
    e.normality = row[pos["normality"]].value_or("");
    out.push_back(std::move(e));
  }
  return out;
}

void write_labeled_csv(std::ostream& out, const std::vector<LabeledEvent>& events) {
  std::vector<std::string> fields(kLabeledColumns.begin(), kLabeledColumns.end());
  write_csv_row(out, fields);
  for (const auto& e : events) {
    fields.clear();
    for (std::size_t c = 0; c < kLabeledFeatureCount; ++c) fields.push_back(e.categorical[c].value_or(""));
    fields.push_back(e.timestamp ? std::to_string(*e.timestamp) : "");
    fields.push_back(e.normality);
    write_csv_row(out, fields);
  }
}

int normality_code(std::string_view normality) { return normality == "normal" ? 0 : 1; }

std::string filled_category(std::size_t column, const std::optional<std::string>& value) {
  if (value) return *value;
  if (column == kAccessedNodeType) return "/batteryService";
  if (column == kValue) return "0";
  return "";
}

LabelEncoder LabelEncoder::fit(const std::vector<LabeledEvent>& events) {
  if (events.empty()) throw std::invalid_argument("label encoder: no events to fit");
  LabelEncoder enc;
  for (std::size_t c = 0; c < kLabeledFeatureCount; ++c) {
    std::set<std::string> cats;
    for (const auto& e : events) cats.insert(filled_category(c, e.categorical[c]));
    enc.vocab_[c].assign(cats.begin(), cats.end());
    for (std::size_t i = 0; i < enc.vocab_[c].size(); ++i) {
      enc.codes_[c][enc.vocab_[c][i]] = static_cast<std::int64_t>(i);
    }
  }
  return enc;
}

std::int64_t LabelEncoder::encode(std::size_t column, const std::string& category) const {
  const auto& m = codes_.at(column);
  auto it = m.find(category);
  return it == m.end() ? static_cast<std::int64_t>(vocab_[column].size()) : it->second;
}

const std::string& LabelEncoder::decode(std::size_t column, std::int64_t code) const {
  const auto& v = vocab_.at(column);
  if (code < 0 || static_cast<std::size_t>(code) >= v.size()) {
    throw std::out_of_range("label encoder: code " + std::to_string(code) + " not in column vocabulary");
  }
  return v[static_cast<std::size_t>(code)];
}

nlohmann::json LabelEncoder::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  const auto& cols = labeled_feature_columns();
  for (std::size_t c = 0; c < kLabeledFeatureCount; ++c) j[std::string(cols[c])] = vocab_[c];
  return j;
}

LabelEncoder LabelEncoder::from_json(const nlohmann::json& j) {
  LabelEncoder enc;
  const auto& cols = labeled_feature_columns();
  try {
    for (std::size_t c = 0; c < kLabeledFeatureCount; ++c) {
      enc.vocab_[c] = j.at(std::string(cols[c])).get<std::vector<std::string>>();
      for (std::size_t i = 0; i < enc.vocab_[c].size(); ++i) {
        enc.codes_[c][enc.vocab_[c][i]] = static_cast<std::int64_t>(i);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("label encoder: ") + e.what());
  }
  return enc;
}

LabeledData clean_labeled(const std::vector<LabeledEvent>& events, const LabelEncoder& encoder) {
  LabeledData out;
  const auto& cols = labeled_feature_columns();
  out.features.column_names.assign(cols.begin(), cols.end());
  out.features.column_names.emplace_back("timestamp");
  out.features.values = Matrix(0, kLabeledFeatureCount + 1);
  out.features.provenance = "clean_labeled(" + std::to_string(events.size()) + " rows)";
  std::vector<double> row(kLabeledFeatureCount + 1);
  for (const auto& e : events) {
    for (std::size_t c = 0; c < kLabeledFeatureCount; ++c) {
      row[c] = static_cast<double>(encoder.encode(c, filled_category(c, e.categorical[c])));
    }
    row[kLabeledFeatureCount] = static_cast<double>(e.timestamp.value_or(0));
    out.features.values.append_row(row);
    out.features.row_ids.push_back(e.id);
    out.labels.push_back(normality_code(e.normality));
  }
  return out;
}

}  // namespace edgepipe
