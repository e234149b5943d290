#pragma once

#include <cstdint>
#include <vector>

namespace edgepipe {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// |train| = round(n * ratio), clamped to [1, n-1]. With labels, each class
// contributes to train in proportion to its size (largest remainder), so
// class shares are preserved on both sides. Throws std::invalid_argument
// when n < 2 or ratio is outside (0, 1).
SplitIndices split_indices(std::size_t n, double ratio, std::uint64_t seed,
                           const std::vector<int>* labels = nullptr);

}  // namespace edgepipe
