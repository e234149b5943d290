#include "edgepipe/ml/iforest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "edgepipe/common/errors.hpp"
#include "edgepipe/common/rng.hpp"

namespace edgepipe {

namespace {

constexpr double kEulerGamma = 0.5772156649;

struct TreeBuilder {
  const Matrix& x;
  int height_limit;
  Rng& rng;
  IsolationTree tree;
  std::vector<std::size_t> splittable;

  int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[id].size = static_cast<std::uint32_t>(hi - lo);
    if (hi - lo <= 1 || depth >= height_limit) return id;

    // Only features with spread in this node can isolate anything.
    splittable.clear();
    std::vector<double> mins(x.cols()), maxs(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
      double mn = x(idx[lo], f), mx = mn;
      for (std::size_t i = lo + 1; i < hi; ++i) {
        const double v = x(idx[i], f);
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      mins[f] = mn;
      maxs[f] = mx;
      if (mn < mx) splittable.push_back(f);
    }
    if (splittable.empty()) return id;

    const std::size_t f = splittable[std::uniform_int_distribution<std::size_t>(0, splittable.size() - 1)(rng)];
    double p = mins[f];
    while (!(p > mins[f] && p <= maxs[f])) p = mins[f] + uniform01(rng) * (maxs[f] - mins[f]);

    auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                              idx.begin() + static_cast<std::ptrdiff_t>(hi),
                              [&](std::size_t r) { return x(r, f) < p; });
    const auto m = static_cast<std::size_t>(mid - idx.begin());
    tree.nodes[id].feature = static_cast<int>(f);
    tree.nodes[id].split = p;
    const int l = build(idx, lo, m, depth + 1);
    const int r = build(idx, m, hi, depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

IsolationTree build_tree(const Matrix& x, std::size_t psi, int height_limit, std::uint64_t seed, std::size_t t) {
  Rng rng = make_rng(seed, t);
  // Partial Fisher-Yates: the first psi entries are a uniform subsample.
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < psi; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, idx.size() - 1)(rng);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(psi);
  TreeBuilder b{x, height_limit, rng, {}, {}};
  b.build(idx, 0, psi, 0);
  return std::move(b.tree);
}

double score_row(const IsolationForestModel& m, std::span<const double> row, double cpsi) {
  double total = 0.0;
  for (const auto& t : m.trees) total += t.path_length(row);
  const double mean = total / static_cast<double>(m.trees.size());
  return std::pow(2.0, -mean / cpsi);
}

}  // namespace

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double nd = static_cast<double>(n);
  return 2.0 * (std::log(nd - 1.0) + kEulerGamma) - 2.0 * (nd - 1.0) / nd;
}

std::size_t contamination_count(std::size_t n, double contamination) {
  const double exact = static_cast<double>(n) * contamination;
  const double nearest = std::round(exact);
  if (std::abs(exact - nearest) <= 1e-9) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(exact));
}

double IsolationTree::path_length(std::span<const double> x) const {
  int node = 0;
  double edges = 0.0;
  while (nodes[node].feature >= 0) {
    const auto& n = nodes[node];
    node = x[static_cast<std::size_t>(n.feature)] < n.split ? n.left : n.right;
    edges += 1.0;
  }
  return edges + average_path_length(nodes[node].size);
}

int IsolationTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

double IsolationForestModel::score(std::span<const double> x) const {
  if (x.size() != feature_schema.size()) {
    throw std::invalid_argument("iforest: expected " + std::to_string(feature_schema.size()) + " features, got " +
                                std::to_string(x.size()));
  }
  return score_row(*this, x, average_path_length(psi));
}

int IsolationForestModel::verdict(std::span<const double> x) const { return verdict_for_score(score(x)); }

std::vector<double> iforest_scores(const IsolationForestModel& model, const Matrix& x, Exec exec) {
  if (x.cols() != model.feature_schema.size()) {
    throw std::invalid_argument("iforest: expected " + std::to_string(model.feature_schema.size()) +
                                " features, got " + std::to_string(x.cols()));
  }
  const double cpsi = average_path_length(model.psi);
  std::vector<double> out(x.rows());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) out[r] = score_row(model, x.row(r), cpsi);
  } else {
    for (std::ptrdiff_t r = 0; r < n; ++r) out[r] = score_row(model, x.row(r), cpsi);
  }
  return out;
}

std::vector<int> flag_top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<int> v(scores.size(), 1);
  for (std::size_t i = 0; i < k && i < order.size(); ++i) v[order[i]] = -1;
  return v;
}

double threshold_for_top_k(const std::vector<double>& scores, std::size_t k) {
  if (k == 0 || k >= scores.size()) throw std::invalid_argument("threshold: k must be in [1, n)");
  std::vector<double> s = scores;
  std::sort(s.begin(), s.end(), std::greater<>());
  const double kth = s[k - 1];
  const double next = s[k];
  return kth == next ? kth : next + (kth - next) / 2.0;
}

IsolationForestFit iforest_fit(const Matrix& x, const std::vector<std::string>& schema,
                               const IsolationForestParams& params, Exec exec) {
  if (x.rows() < 2) throw std::invalid_argument("iforest: need at least 2 rows");
  if (!(params.contamination > 0.0 && params.contamination < 0.5)) {
    throw std::invalid_argument("iforest: contamination must be in (0, 0.5)");
  }
  if (params.n_trees == 0 || params.subsample < 2) throw std::invalid_argument("iforest: bad tree parameters");
  if (schema.size() != x.cols()) throw std::invalid_argument("iforest: schema does not match column count");

  IsolationForestFit fit;
  auto& m = fit.model;
  m.params = params;
  m.psi = std::min(params.subsample, x.rows());
  m.height_limit = static_cast<int>(std::ceil(std::log2(static_cast<double>(m.psi))));
  m.feature_schema = schema;
  m.training_rows = x.rows();
  m.trees.resize(params.n_trees);
  const auto t_count = static_cast<std::ptrdiff_t>(params.n_trees);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < t_count; ++t) {
      m.trees[t] = build_tree(x, m.psi, m.height_limit, params.seed, static_cast<std::size_t>(t));
    }
  } else {
    for (std::ptrdiff_t t = 0; t < t_count; ++t) {
      m.trees[t] = build_tree(x, m.psi, m.height_limit, params.seed, static_cast<std::size_t>(t));
    }
  }

  fit.training_scores = iforest_scores(m, x, exec);
  const std::size_t k = contamination_count(x.rows(), params.contamination);
  fit.training_verdicts = flag_top_k(fit.training_scores, k);
  m.threshold = threshold_for_top_k(fit.training_scores, k);
  m.training_flagged = k;
  return fit;
}

nlohmann::json IsolationForestModel::to_json() const {
  nlohmann::json j;
  j["n_trees"] = params.n_trees;
  j["subsample"] = params.subsample;
  j["contamination"] = params.contamination;
  j["seed"] = params.seed;
  j["psi"] = psi;
  j["height_limit"] = height_limit;
  j["threshold"] = threshold;
  j["feature_schema"] = feature_schema;
  j["training_rows"] = training_rows;
  j["training_flagged"] = training_flagged;
  auto& trees_json = j["trees"] = nlohmann::json::array();
  for (const auto& t : trees) {
    // Flat columns keep artifacts compact.
    nlohmann::json f = nlohmann::json::array(), s = nlohmann::json::array(), l = nlohmann::json::array(),
                   r = nlohmann::json::array(), n = nlohmann::json::array();
    for (const auto& node : t.nodes) {
      f.push_back(node.feature);
      s.push_back(node.split);
      l.push_back(node.left);
      r.push_back(node.right);
      n.push_back(node.size);
    }
    trees_json.push_back({{"feature", f}, {"split", s}, {"left", l}, {"right", r}, {"size", n}});
  }
  return j;
}

IsolationForestModel IsolationForestModel::from_json(const nlohmann::json& j) {
  try {
    IsolationForestModel m;
    m.params.n_trees = j.at("n_trees").get<std::size_t>();
    m.params.subsample = j.at("subsample").get<std::size_t>();
    m.params.contamination = j.at("contamination").get<double>();
    m.params.seed = j.at("seed").get<std::uint64_t>();
    m.psi = j.at("psi").get<std::size_t>();
    m.height_limit = j.at("height_limit").get<int>();
    m.threshold = j.at("threshold").get<double>();
    m.feature_schema = j.at("feature_schema").get<std::vector<std::string>>();
    m.training_rows = j.at("training_rows").get<std::size_t>();
    m.training_flagged = j.at("training_flagged").get<std::size_t>();
    for (const auto& tj : j.at("trees")) {
      IsolationTree t;
      const auto& f = tj.at("feature");
      t.nodes.resize(f.size());
      for (std::size_t i = 0; i < f.size(); ++i) {
        t.nodes[i].feature = f[i].get<int>();
        t.nodes[i].split = tj.at("split")[i].get<double>();
        t.nodes[i].left = tj.at("left")[i].get<int>();
        t.nodes[i].right = tj.at("right")[i].get<int>();
        t.nodes[i].size = tj.at("size")[i].get<std::uint32_t>();
      }
      if (t.nodes.empty()) throw DataError("iforest: empty tree in artifact");
      m.trees.push_back(std::move(t));
    }
    if (m.trees.empty() || m.psi < 2) throw DataError("iforest: artifact has no trees");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("iforest artifact: ") + e.what());
  }
}

}  // namespace edgepipe
