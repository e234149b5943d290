#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "edgepipe/common/matrix.hpp"
#include "edgepipe/ml/exec.hpp"

namespace edgepipe {

// The k nearest other rows of every row (squared Euclidean, ties to the
// lower index), nearest first. Brute force.
std::vector<std::vector<std::size_t>> knn_indices(const Matrix& x, std::size_t k, Exec exec = Exec::parallel);

struct SmoteParams {
  std::size_t k_neighbors = 5;
  std::size_t target_count = 0;  // minority size after oversampling
  std::uint64_t seed = 0;
};

struct SmoteOrigin {
  std::size_t base;
  std::size_t neighbor;
  double u;
};

struct SmoteResult {
  Matrix synthetic;                  // target_count - |minority| rows
  std::vector<SmoteOrigin> origins;  // one per synthetic row
  std::size_t zero_distance = 0;     // base and neighbor coincided
};

// synthetic = x_base + u * (x_neighbor - x_base), base uniform over the
// minority rows, neighbor uniform over its k nearest, u ~ U(0, 1).
// Throws std::invalid_argument unless |minority| > k_neighbors and
// target_count >= |minority|.
SmoteResult smote(const Matrix& minority, const SmoteParams& params, Exec exec = Exec::parallel);

}  // namespace edgepipe
