#include "edgepipe/ml/smote.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

#include "edgepipe/common/rng.hpp"

namespace edgepipe {

namespace {

std::vector<std::size_t> neighbors_of(const Matrix& x, std::size_t i, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(x.rows() - 1);
  const auto row = x.row(i);
  for (std::size_t j = 0; j < x.rows(); ++j) {
    if (j != i) d.emplace_back(squared_distance(row, x.row(j)), j);
  }
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t m = 0; m < k; ++m) out[m] = d[m].second;
  return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> knn_indices(const Matrix& x, std::size_t k, Exec exec) {
  if (k >= x.rows()) throw std::invalid_argument("knn: k must be smaller than the row count");
  std::vector<std::vector<std::size_t>> out(x.rows());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = neighbors_of(x, static_cast<std::size_t>(i), k);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = neighbors_of(x, static_cast<std::size_t>(i), k);
  }
  return out;
}

SmoteResult smote(const Matrix& minority, const SmoteParams& params, Exec exec) {
  const std::size_t m = minority.rows();
  if (params.k_neighbors == 0 || m <= params.k_neighbors) {
    throw std::invalid_argument("smote: minority class needs more than k_neighbors rows");
  }
  if (params.target_count < m) throw std::invalid_argument("smote: target_count below minority size");

  SmoteResult out;
  out.synthetic = Matrix(0, minority.cols());
  const std::size_t need = params.target_count - m;
  if (need == 0) return out;

  const auto nn = knn_indices(minority, params.k_neighbors, exec);
  Rng rng = make_rng(params.seed, 0x5307e);
  std::uniform_int_distribution<std::size_t> pick_base(0, m - 1);
  std::uniform_int_distribution<std::size_t> pick_nn(0, params.k_neighbors - 1);
  std::vector<double> row(minority.cols());
  out.origins.reserve(need);
  for (std::size_t s = 0; s < need; ++s) {
    const std::size_t b = pick_base(rng);
    const std::size_t j = nn[b][pick_nn(rng)];
    const double u = uniform01(rng);
    const auto xb = minority.row(b);
    const auto xn = minority.row(j);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = xb[c] + u * (xn[c] - xb[c]);
    if (squared_distance(xb, xn) == 0.0) ++out.zero_distance;
    out.synthetic.append_row(row);
    out.origins.push_back({b, j, u});
  }
  return out;
}

}  // namespace edgepipe
