#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edgepipe/ml/cluster_report.hpp"
#include "edgepipe/ml/iforest.hpp"
#include "edgepipe/ml/kmeans.hpp"
#include "json.hpp"

namespace edgepipe {

// A trained anomaly model. Each station gets its own detector (and, when
// enough anomalies were flagged, its own cluster analysis).
struct ModelArtifact {
  static constexpr int kFormat = 1;

  std::int64_t version = 0;
  std::string kind = "isolation_forest";
  bool approved = false;
  std::string trained_at;  // ISO 8601
  std::size_t training_rows = 0;
  std::vector<std::string> feature_schema;
  nlohmann::json metrics = nlohmann::json::object();
  std::map<std::string, IsolationForestModel> detectors;  // by station path
  std::map<std::string, KMeansModel> clusterers;
  std::map<std::string, ClusterReport> reports;

  // nullptr when the station has no detector.
  const IsolationForestModel* detector_for(const std::string& station) const;

  nlohmann::json to_json() const;
  // Throws DataError on schema violations.
  static ModelArtifact from_json(const nlohmann::json& j);
};

}  // namespace edgepipe
