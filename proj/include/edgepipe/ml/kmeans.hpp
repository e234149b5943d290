#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "edgepipe/common/matrix.hpp"
#include "edgepipe/common/rng.hpp"
#include "edgepipe/ml/exec.hpp"
#include "json.hpp"

namespace edgepipe {

struct KMeansParams {
  std::size_t k = 4;
  std::size_t max_iter = 300;
  std::size_t n_init = 10;
  std::uint64_t seed = 0;
};

struct KMeansModel {
  std::size_t k = 0;
  Matrix centroids;
  double inertia = 0.0;
  std::size_t iterations_run = 0;
  // Inertia after every assignment step of the winning restart.
  std::vector<double> inertia_history;
  std::vector<int> labels;  // final training assignment

  nlohmann::json to_json() const;
  static KMeansModel from_json(const nlohmann::json& j);
};

// Nearest centroid by squared Euclidean distance, ties to the lower index.
std::vector<int> kmeans_assign(const Matrix& centroids, const Matrix& x, Exec exec = Exec::parallel);

double kmeans_inertia(const Matrix& centroids, const Matrix& x, const std::vector<int>& labels);

// One Lloyd run from k distinct points drawn uniformly. Empty clusters are
// reseeded to the point farthest from its nearest centroid.
KMeansModel kmeans_single(const Matrix& x, std::size_t k, std::size_t max_iter, Rng& rng,
                          Exec exec = Exec::parallel);

// Best of n_init restarts by inertia (ties to the earlier restart).
// Throws std::invalid_argument when k is 0 or exceeds the distinct rows.
KMeansModel kmeans_fit(const Matrix& x, const KMeansParams& params, Exec exec = Exec::parallel);

}  // namespace edgepipe
