#include "edgepipe/ml/cluster_report.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "edgepipe/common/csv.hpp"
#include "edgepipe/common/errors.hpp"

namespace edgepipe {

namespace {

double interp(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

ClusterGroup summarize(const Matrix& x, const std::vector<std::size_t>& rows, std::string name) {
  ClusterGroup g;
  g.name = std::move(name);
  g.count = rows.size();
  for (std::size_t c = 0; c < x.cols(); ++c) {
    std::vector<double> v;
    v.reserve(rows.size());
    double sum = 0.0;
    for (auto r : rows) {
      v.push_back(x(r, c));
      sum += x(r, c);
    }
    g.mean.push_back(rows.empty() ? 0.0 : sum / static_cast<double>(rows.size()));
    g.quantiles.push_back(rows.empty() ? Quantiles{} : quantiles_of(std::move(v)));
  }
  return g;
}

nlohmann::json group_json(const ClusterGroup& g) {
  nlohmann::json j;
  j["name"] = g.name;
  j["count"] = g.count;
  j["mean"] = g.mean;
  auto& q = j["quantiles"] = nlohmann::json::array();
  for (const auto& x : g.quantiles) q.push_back({x.min, x.q1, x.median, x.q3, x.max});
  return j;
}

ClusterGroup group_from_json(const nlohmann::json& j) {
  ClusterGroup g;
  g.name = j.at("name").get<std::string>();
  g.count = j.at("count").get<std::size_t>();
  g.mean = j.at("mean").get<std::vector<double>>();
  for (const auto& q : j.at("quantiles")) {
    const auto v = q.get<std::vector<double>>();
    if (v.size() != 5) throw DataError("cluster report: quantile row needs 5 values");
    g.quantiles.push_back({v[0], v[1], v[2], v[3], v[4]});
  }
  return g;
}

}  // namespace

Quantiles quantiles_of(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("quantiles: empty input");
  std::sort(values.begin(), values.end());
  return {values.front(), interp(values, 0.25), interp(values, 0.5), interp(values, 0.75), values.back()};
}

ClusterReport cluster_report(const Matrix& x, const std::vector<bool>& anomaly_mask, const std::vector<int>& labels,
                             const std::vector<std::string>& features) {
  if (anomaly_mask.size() != x.rows() || labels.size() != x.rows()) {
    throw std::invalid_argument("cluster report: mask/labels must have one entry per row");
  }
  if (features.size() != x.cols()) throw std::invalid_argument("cluster report: feature names do not match columns");
  int k = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (!anomaly_mask[r]) continue;
    if (labels[r] < 0) throw std::invalid_argument("cluster report: anomaly row without a cluster label");
    k = std::max(k, labels[r] + 1);
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
  std::vector<std::size_t> normal;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (anomaly_mask[r]) members[static_cast<std::size_t>(labels[r])].push_back(r);
    else normal.push_back(r);
  }
  ClusterReport rep;
  rep.features = features;
  for (int c = 0; c < k; ++c) rep.clusters.push_back(summarize(x, members[c], "cluster" + std::to_string(c)));
  rep.normal = summarize(x, normal, "normal");
  return rep;
}

void ClusterReport::write_csv(std::ostream& out) const {
  std::vector<std::string> header{"group", "count", "stat"};
  header.insert(header.end(), features.begin(), features.end());
  write_csv_row(out, header);
  auto emit = [&](const ClusterGroup& g) {
    auto line = [&](const char* stat, auto get) {
      std::vector<std::string> f{g.name, std::to_string(g.count), stat};
      for (std::size_t c = 0; c < features.size(); ++c) f.push_back(format_double(get(c)));
      write_csv_row(out, f);
    };
    line("mean", [&](std::size_t c) { return g.mean[c]; });
    line("min", [&](std::size_t c) { return g.quantiles[c].min; });
    line("q1", [&](std::size_t c) { return g.quantiles[c].q1; });
    line("median", [&](std::size_t c) { return g.quantiles[c].median; });
    line("q3", [&](std::size_t c) { return g.quantiles[c].q3; });
    line("max", [&](std::size_t c) { return g.quantiles[c].max; });
  };
  for (const auto& g : clusters) emit(g);
  emit(normal);
}

nlohmann::json ClusterReport::to_json() const {
  nlohmann::json j;
  j["features"] = features;
  j["clusters"] = nlohmann::json::array();
  for (const auto& g : clusters) j["clusters"].push_back(group_json(g));
  j["normal"] = group_json(normal);
  return j;
}

ClusterReport ClusterReport::from_json(const nlohmann::json& j) {
  try {
    ClusterReport r;
    r.features = j.at("features").get<std::vector<std::string>>();
    for (const auto& g : j.at("clusters")) r.clusters.push_back(group_from_json(g));
    r.normal = group_from_json(j.at("normal"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("cluster report: ") + e.what());
  }
}

}  // namespace edgepipe
