#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "edgepipe/common/matrix.hpp"
#include "json.hpp"

namespace edgepipe {

struct Quantiles {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

// Linear interpolation between order statistics (position q * (n - 1)).
Quantiles quantiles_of(std::vector<double> values);

struct ClusterGroup {
  std::string name;  // "cluster<k>" or "normal"
  std::size_t count = 0;
  std::vector<double> mean;
  std::vector<Quantiles> quantiles;
};

struct ClusterReport {
  std::vector<std::string> features;
  std::vector<ClusterGroup> clusters;  // index = cluster label
  ClusterGroup normal;

  // Long form: group,count,stat,<features...> with stat in
  // {mean,min,q1,median,q3,max}.
  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;
  static ClusterReport from_json(const nlohmann::json& j);
};

// labels[r] is read only where anomaly_mask[r]; k = 1 + max label.
// Throws std::invalid_argument on size mismatches or negative labels on
// anomaly rows.
ClusterReport cluster_report(const Matrix& x, const std::vector<bool>& anomaly_mask, const std::vector<int>& labels,
                             const std::vector<std::string>& features);

}  // namespace edgepipe
