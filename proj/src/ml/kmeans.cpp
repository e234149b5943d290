#include "edgepipe/ml/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "edgepipe/common/errors.hpp"

namespace edgepipe {

namespace {

int nearest(const Matrix& centroids, std::span<const double> row, double* dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(centroids.row(c), row);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

std::size_t count_distinct_rows(const Matrix& x, std::size_t stop_at) {
  std::set<std::vector<double>> seen;
  for (std::size_t r = 0; r < x.rows() && seen.size() < stop_at; ++r) {
    seen.emplace(x.row(r).begin(), x.row(r).end());
  }
  return seen.size();
}

}  // namespace

std::vector<int> kmeans_assign(const Matrix& centroids, const Matrix& x, Exec exec) {
  if (centroids.cols() != x.cols()) throw std::invalid_argument("kmeans: column count mismatch");
  std::vector<int> labels(x.rows());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) labels[r] = nearest(centroids, x.row(r));
  } else {
    for (std::ptrdiff_t r = 0; r < n; ++r) labels[r] = nearest(centroids, x.row(r));
  }
  return labels;
}

double kmeans_inertia(const Matrix& centroids, const Matrix& x, const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) total += squared_distance(centroids.row(labels[r]), x.row(r));
  return total;
}

KMeansModel kmeans_single(const Matrix& x, std::size_t k, std::size_t max_iter, Rng& rng, Exec exec) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  KMeansModel m;
  m.k = k;
  m.centroids = Matrix(k, d);

  // Random order, keep the first k pairwise-distinct rows.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t chosen = 0;
  for (std::size_t i = 0; i < n && chosen < k; ++i) {
    const auto row = x.row(order[i]);
    bool dup = false;
    for (std::size_t c = 0; c < chosen && !dup; ++c) dup = squared_distance(m.centroids.row(c), row) == 0.0;
    if (dup) continue;
    std::copy(row.begin(), row.end(), m.centroids.row(chosen).begin());
    ++chosen;
  }
  if (chosen < k) throw std::invalid_argument("kmeans: fewer distinct points than k");

  m.labels = kmeans_assign(m.centroids, x, exec);
  m.inertia_history.push_back(kmeans_inertia(m.centroids, x, m.labels));
  for (std::size_t it = 0; it < max_iter; ++it) {
    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < n; ++r) {
      auto s = sums.row(m.labels[r]);
      const auto row = x.row(r);
      for (std::size_t j = 0; j < d; ++j) s[j] += row[j];
      ++counts[m.labels[r]];
    }
    std::vector<char> taken(n, 0);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < d; ++j) m.centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the worst-served point.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t r = 0; r < n; ++r) {
        if (taken[r]) continue;
        double dist = 0.0;
        nearest(m.centroids, x.row(r), &dist);
        if (dist > far_d) {
          far_d = dist;
          far = r;
        }
      }
      taken[far] = 1;
      std::copy(x.row(far).begin(), x.row(far).end(), m.centroids.row(c).begin());
    }
    auto next = kmeans_assign(m.centroids, x, exec);
    m.inertia_history.push_back(kmeans_inertia(m.centroids, x, next));
    ++m.iterations_run;
    const bool stable = next == m.labels;
    m.labels = std::move(next);
    if (stable) break;
  }
  m.inertia = m.inertia_history.back();
  return m;
}

KMeansModel kmeans_fit(const Matrix& x, const KMeansParams& params, Exec exec) {
  if (params.k == 0) throw std::invalid_argument("kmeans: k must be >= 1");
  if (params.n_init == 0) throw std::invalid_argument("kmeans: n_init must be >= 1");
  if (count_distinct_rows(x, params.k) < params.k) throw std::invalid_argument("kmeans: fewer distinct points than k");
  KMeansModel best;
  bool have = false;
  for (std::size_t run = 0; run < params.n_init; ++run) {
    Rng rng = make_rng(params.seed, run);
    auto m = kmeans_single(x, params.k, params.max_iter, rng, exec);
    if (!have || m.inertia < best.inertia) {
      best = std::move(m);
      have = true;
    }
  }
  return best;
}

nlohmann::json KMeansModel::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  j["inertia"] = inertia;
  j["iterations_run"] = iterations_run;
  auto& c = j["centroids"] = nlohmann::json::array();
  for (std::size_t r = 0; r < centroids.rows(); ++r) {
    c.push_back(std::vector<double>(centroids.row(r).begin(), centroids.row(r).end()));
  }
  return j;
}

KMeansModel KMeansModel::from_json(const nlohmann::json& j) {
  try {
    KMeansModel m;
    m.k = j.at("k").get<std::size_t>();
    m.inertia = j.at("inertia").get<double>();
    m.iterations_run = j.at("iterations_run").get<std::size_t>();
    const auto rows = j.at("centroids").get<std::vector<std::vector<double>>>();
    if (rows.size() != m.k || rows.empty()) throw DataError("kmeans: centroid count does not match k");
    m.centroids = Matrix(0, rows[0].size());
    for (const auto& r : rows) m.centroids.append_row(r);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("kmeans artifact: ") + e.what());
  }
}

}  // namespace edgepipe
