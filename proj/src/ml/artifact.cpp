#include "edgepipe/ml/artifact.hpp"

#include "edgepipe/common/errors.hpp"

namespace edgepipe {

const IsolationForestModel* ModelArtifact::detector_for(const std::string& station) const {
  auto it = detectors.find(station);
  return it == detectors.end() ? nullptr : &it->second;
}

nlohmann::json ModelArtifact::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = version;
  j["kind"] = kind;
  j["approved"] = approved;
  j["trained_at"] = trained_at;
  j["training_rows"] = training_rows;
  j["feature_schema"] = feature_schema;
  j["metrics"] = metrics;
  nlohmann::json stations = nlohmann::json::object();
  for (const auto& [station, det] : detectors) {
    nlohmann::json s;
    s["detector"] = det.to_json();
    if (auto it = clusterers.find(station); it != clusterers.end()) s["kmeans"] = it->second.to_json();
    if (auto it = reports.find(station); it != reports.end()) s["cluster_report"] = it->second.to_json();
    stations[station] = s;
  }
  j["stations"] = stations;
  return nlohmann::json(j);
}

ModelArtifact ModelArtifact::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<int>() != kFormat) throw DataError("artifact: unsupported format");
    ModelArtifact a;
    a.version = j.at("version").get<std::int64_t>();
    a.kind = j.at("kind").get<std::string>();
    a.approved = j.at("approved").get<bool>();
    a.trained_at = j.at("trained_at").get<std::string>();
    a.training_rows = j.at("training_rows").get<std::size_t>();
    a.feature_schema = j.at("feature_schema").get<std::vector<std::string>>();
    a.metrics = j.at("metrics");
    for (const auto& [station, s] : j.at("stations").items()) {
      auto det = IsolationForestModel::from_json(s.at("detector"));
      if (det.feature_schema != a.feature_schema) throw DataError("artifact: detector schema differs for " + station);
      a.detectors.emplace(station, std::move(det));
      if (s.contains("kmeans")) a.clusterers.emplace(station, KMeansModel::from_json(s["kmeans"]));
      if (s.contains("cluster_report")) a.reports.emplace(station, ClusterReport::from_json(s["cluster_report"]));
    }
    if (a.kind != "isolation_forest") throw DataError("artifact: unsupported kind '" + a.kind + "'");
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("artifact: ") + e.what());
  }
}

}  // namespace edgepipe
