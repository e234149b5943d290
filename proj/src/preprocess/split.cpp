#include "edgepipe/preprocess/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "edgepipe/common/rng.hpp"

namespace edgepipe {

SplitIndices split_indices(std::size_t n, double ratio, std::uint64_t seed, const std::vector<int>* labels) {
  if (n < 2) throw std::invalid_argument("split: need at least 2 rows");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split: ratio must be in (0, 1)");
  if (labels && labels->size() != n) throw std::invalid_argument("split: label count mismatch");

  const auto want = static_cast<std::size_t>(
      std::clamp<long long>(std::llround(static_cast<double>(n) * ratio), 1, static_cast<long long>(n) - 1));
  Rng rng = make_rng(seed, 0x5711);
  SplitIndices out;

  if (!labels) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(want));
    out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(want), idx.end());
    return out;
  }

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[(*labels)[i]].push_back(i);

  // Largest remainder apportionment of `want` across classes.
  struct Quota {
    int cls;
    std::size_t base;
    double frac;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [cls, members] : by_class) {
    const double exact = static_cast<double>(want) * static_cast<double>(members.size()) / static_cast<double>(n);
    const auto base = static_cast<std::size_t>(std::floor(exact + 1e-9));
    quotas.push_back({cls, std::min(base, members.size()), exact - static_cast<double>(base)});
    assigned += quotas.back().base;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return quotas[a].frac > quotas[b].frac; });
  for (std::size_t k = 0; assigned < want; k = (k + 1) % order.size()) {
    auto& q = quotas[order[k]];
    if (q.base < by_class[q.cls].size()) {
      ++q.base;
      ++assigned;
    }
  }

  for (const auto& q : quotas) {
    auto members = by_class[q.cls];
    std::shuffle(members.begin(), members.end(), rng);
    out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(q.base));
    out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(q.base), members.end());
  }
  std::shuffle(out.train.begin(), out.train.end(), rng);
  std::shuffle(out.test.begin(), out.test.end(), rng);
  return out;
}

}  // namespace edgepipe
