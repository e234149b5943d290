#include "edgepipe/ml/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "edgepipe/common/rng.hpp"

namespace edgepipe {

namespace {

struct Binned {
  std::size_t rows = 0;
  const BinMapper* mapper = nullptr;
  std::vector<std::uint16_t> codes;

  std::uint16_t at(std::size_t f, std::size_t r) const { return codes[f * rows + r]; }
  std::size_t cols() const { return mapper->cuts.size(); }
};

double impurity(Criterion c, double n0, double n1) {
  const double n = n0 + n1;
  if (n <= 0.0) return 0.0;
  const double p0 = n0 / n;
  const double p1 = n1 / n;
  if (c == Criterion::gini) return 1.0 - p0 * p0 - p1 * p1;
  double e = 0.0;
  if (p0 > 0.0) e -= p0 * std::log2(p0);
  if (p1 > 0.0) e -= p1 * std::log2(p1);
  return e;
}

void check_labels(const Matrix& x, const std::vector<int>& y) {
  if (y.size() != x.rows()) throw std::invalid_argument("forest: label count does not match rows");
  if (x.rows() == 0) throw std::invalid_argument("forest: empty training set");
  for (int v : y) {
    if (v != 0 && v != 1) throw std::invalid_argument("forest: labels must be 0 or 1");
  }
}

std::optional<int> single_class(const std::vector<int>& y) {
  const bool all0 = std::all_of(y.begin(), y.end(), [](int v) { return v == 0; });
  const bool all1 = std::all_of(y.begin(), y.end(), [](int v) { return v == 1; });
  if (all0) return 0;
  if (all1) return 1;
  return std::nullopt;
}

class ClassTreeBuilder {
 public:
  ClassTreeBuilder(const Binned& b, const std::vector<int>& y, const RfParams& p, std::size_t mtry, Rng& rng)
      : b_(b), y_(y), p_(p), mtry_(mtry), rng_(rng) {
    std::size_t max_bins = 0;
    for (std::size_t f = 0; f < b.cols(); ++f) max_bins = std::max(max_bins, b.mapper->bin_count(f));
    h0_.resize(max_bins);
    h1_.resize(max_bins);
    order_.resize(b.cols());
    std::iota(order_.begin(), order_.end(), 0);
  }

  DecisionTree run(std::vector<std::size_t>& idx) {
    build(idx, 0, idx.size(), 0);
    return std::move(tree_);
  }

 private:
  int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    double n0 = 0.0, n1 = 0.0;
    for (std::size_t i = lo; i < hi; ++i) (y_[idx[i]] ? n1 : n0) += 1.0;
    const std::size_t n = hi - lo;
    tree_.nodes[id].value = n1 / static_cast<double>(n);
    if ((p_.max_depth >= 0 && depth >= p_.max_depth) || n < p_.min_samples_split || n0 == 0.0 || n1 == 0.0 ||
        n < 2 * p_.min_samples_leaf) {
      return id;
    }
    const double parent = impurity(p_.criterion, n0, n1);

    std::shuffle(order_.begin(), order_.end(), rng_);
    int best_f = -1;
    std::size_t best_bin = 0;
    double best_dec = -1.0;
    // Examine mtry features; keep going past mtry only while nothing is
    // splittable, so an impure node is never left unsplit needlessly.
    for (std::size_t k = 0; k < order_.size(); ++k) {
      if (k >= mtry_ && best_f >= 0) break;
      const std::size_t f = order_[k];
      const std::size_t bins = b_.mapper->bin_count(f);
      std::fill(h0_.begin(), h0_.begin() + static_cast<std::ptrdiff_t>(bins), 0.0);
      std::fill(h1_.begin(), h1_.begin() + static_cast<std::ptrdiff_t>(bins), 0.0);
      for (std::size_t i = lo; i < hi; ++i) {
        const std::size_t r = idx[i];
        (y_[r] ? h1_ : h0_)[b_.at(f, r)] += 1.0;
      }
      double l0 = 0.0, l1 = 0.0;
      for (std::size_t bin = 0; bin + 1 < bins; ++bin) {
        if (h0_[bin] + h1_[bin] == 0.0) continue;
        l0 += h0_[bin];
        l1 += h1_[bin];
        const double nl = l0 + l1;
        const double nr = static_cast<double>(n) - nl;
        if (nl < static_cast<double>(p_.min_samples_leaf) || nr < static_cast<double>(p_.min_samples_leaf)) continue;
        if (nr <= 0.0) break;
        const double dec = parent - (nl / static_cast<double>(n)) * impurity(p_.criterion, l0, l1) -
                           (nr / static_cast<double>(n)) * impurity(p_.criterion, n0 - l0, n1 - l1);
        if (dec > best_dec) {
          best_dec = dec;
          best_f = static_cast<int>(f);
          best_bin = bin;
        }
      }
    }
    if (best_f < 0) return id;

    const auto f = static_cast<std::size_t>(best_f);
    auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(hi),
                              [&](std::size_t r) { return b_.at(f, r) <= best_bin; });
    const auto m = static_cast<std::size_t>(mid - idx.begin());
    tree_.nodes[id].feature = best_f;
    tree_.nodes[id].threshold = b_.mapper->cuts[f][best_bin];
    const int l = build(idx, lo, m, depth + 1);
    const int r = build(idx, m, hi, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  const Binned& b_;
  const std::vector<int>& y_;
  const RfParams& p_;
  std::size_t mtry_;
  Rng& rng_;
  DecisionTree tree_;
  std::vector<double> h0_, h1_;
  std::vector<std::size_t> order_;
};

// Second-order regression tree on gradients g and hessians h. Leaf values
// are the raw Newton steps -G / (H + lambda); leaf_of records each row's leaf.
class GradTreeBuilder {
 public:
  GradTreeBuilder(const Binned& b, const std::vector<double>& g, const std::vector<double>& h, const GbtParams& p)
      : b_(b), g_(g), h_(h), p_(p), leaf_of(b.rows, -1) {
    std::size_t max_bins = 0;
    for (std::size_t f = 0; f < b.cols(); ++f) max_bins = std::max(max_bins, b.mapper->bin_count(f));
    hg_.resize(max_bins);
    hh_.resize(max_bins);
    hc_.resize(max_bins);
  }

  DecisionTree run() {
    std::vector<std::size_t> idx(b_.rows);
    std::iota(idx.begin(), idx.end(), 0);
    build(idx, 0, idx.size(), 0);
    return std::move(tree_);
  }

 private:
  double score(double g, double h) const { return g * g / (h + p_.lambda); }

  int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    double G = 0.0, H = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      G += g_[idx[i]];
      H += h_[idx[i]];
    }
    const std::size_t n = hi - lo;
    tree_.nodes[id].value = -G / (H + p_.lambda);
    auto make_leaf = [&] {
      for (std::size_t i = lo; i < hi; ++i) leaf_of[idx[i]] = id;
      return id;
    };
    if (depth >= p_.max_depth || n < 2 * p_.min_samples_leaf) return make_leaf();

    const double parent = score(G, H);
    int best_f = -1;
    std::size_t best_bin = 0;
    double best_gain = 1e-12;
    for (std::size_t f = 0; f < b_.cols(); ++f) {
      const std::size_t bins = b_.mapper->bin_count(f);
      std::fill(hg_.begin(), hg_.begin() + static_cast<std::ptrdiff_t>(bins), 0.0);
      std::fill(hh_.begin(), hh_.begin() + static_cast<std::ptrdiff_t>(bins), 0.0);
      std::fill(hc_.begin(), hc_.begin() + static_cast<std::ptrdiff_t>(bins), 0);
      for (std::size_t i = lo; i < hi; ++i) {
        const std::size_t r = idx[i];
        const auto code = b_.at(f, r);
        hg_[code] += g_[r];
        hh_[code] += h_[r];
        ++hc_[code];
      }
      double gl = 0.0, hl = 0.0;
      std::size_t cl = 0;
      for (std::size_t bin = 0; bin + 1 < bins; ++bin) {
        if (hc_[bin] == 0) continue;
        gl += hg_[bin];
        hl += hh_[bin];
        cl += hc_[bin];
        const std::size_t cr = n - cl;
        if (cr == 0) break;
        if (cl < p_.min_samples_leaf || cr < p_.min_samples_leaf) continue;
        const double gain = 0.5 * (score(gl, hl) + score(G - gl, H - hl) - parent);
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_bin = bin;
        }
      }
    }
    if (best_f < 0) return make_leaf();

    const auto f = static_cast<std::size_t>(best_f);
    auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(hi),
                              [&](std::size_t r) { return b_.at(f, r) <= best_bin; });
    const auto m = static_cast<std::size_t>(mid - idx.begin());
    tree_.nodes[id].feature = best_f;
    tree_.nodes[id].threshold = b_.mapper->cuts[f][best_bin];
    const int l = build(idx, lo, m, depth + 1);
    const int r = build(idx, m, hi, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  const Binned& b_;
  const std::vector<double>& g_;
  const std::vector<double>& h_;
  const GbtParams& p_;
  DecisionTree tree_;
  std::vector<double> hg_, hh_;
  std::vector<std::size_t> hc_;

 public:
  std::vector<int> leaf_of;
};

double row_loss(int y, double raw) {
  // log(1 + e^raw) - y * raw, stable for large |raw|.
  const double softplus = raw > 0 ? raw + std::log1p(std::exp(-raw)) : std::log1p(std::exp(raw));
  return softplus - (y ? raw : 0.0);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::string_view criterion_name(Criterion c) { return c == Criterion::gini ? "gini" : "entropy"; }

std::optional<Criterion> criterion_from_name(std::string_view name) {
  if (name == "gini") return Criterion::gini;
  if (name == "entropy") return Criterion::entropy;
  return std::nullopt;
}

std::string_view forest_kind_name(ForestKind k) {
  return k == ForestKind::random_forest ? "random_forest" : "gradient_boosted";
}

double DecisionTree::predict(std::span<const double> x) const {
  int node = 0;
  while (nodes[node].feature >= 0) {
    const auto& n = nodes[node];
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[node].value;
}

int DecisionTree::depth() const {
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

BinMapper BinMapper::fit(const Matrix& x, std::size_t max_bins) {
  if (max_bins < 2 || max_bins > 65535) throw std::invalid_argument("bins: max_bins must be in [2, 65535]");
  BinMapper m;
  m.cuts.resize(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::vector<double> d = x.column(f);
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    auto mid = [&](std::size_t i) { return d[i - 1] + (d[i] - d[i - 1]) / 2.0; };
    auto& cuts = m.cuts[f];
    if (d.size() <= max_bins) {
      for (std::size_t i = 1; i < d.size(); ++i) cuts.push_back(mid(i));
    } else {
      for (std::size_t j = 1; j < max_bins; ++j) cuts.push_back(mid(j * d.size() / max_bins));
    }
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  }
  return m;
}

std::vector<std::uint16_t> BinMapper::transform(const Matrix& x) const {
  std::vector<std::uint16_t> out(x.rows() * x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    const auto& c = cuts[f];
    for (std::size_t r = 0; r < x.rows(); ++r) {
      out[f * x.rows() + r] = static_cast<std::uint16_t>(std::lower_bound(c.begin(), c.end(), x(r, f)) - c.begin());
    }
  }
  return out;
}

ForestModel rf_fit(const Matrix& x, const std::vector<int>& y, const RfParams& params, std::uint64_t seed) {
  check_labels(x, y);
  if (params.n_estimators == 0) throw std::invalid_argument("rf: n_estimators must be >= 1");
  if (!(params.max_features > 0.0 && params.max_features <= 1.0)) {
    throw std::invalid_argument("rf: max_features must be in (0, 1]");
  }
  ForestModel model;
  model.kind = ForestKind::random_forest;
  model.rf = params;
  model.constant_label = single_class(y);
  if (model.constant_label) return model;

  const BinMapper mapper = BinMapper::fit(x, params.max_bins);
  Binned b{x.rows(), &mapper, mapper.transform(x)};
  const std::size_t features = x.cols();
  const auto mtry = static_cast<std::size_t>(
      std::clamp<long>(std::lround(params.max_features * static_cast<double>(features)), 1, static_cast<long>(features)));
  model.trees.resize(params.n_estimators);
  const auto count = static_cast<std::ptrdiff_t>(params.n_estimators);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < count; ++t) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(t));
    std::vector<std::size_t> idx(x.rows());
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, x.rows() - 1);
      for (auto& i : idx) i = pick(rng);
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    ClassTreeBuilder builder(b, y, params, mtry, rng);
    model.trees[t] = builder.run(idx);
  }
  return model;
}

ForestModel gbt_fit(const Matrix& x, const std::vector<int>& y, const GbtParams& params, std::uint64_t seed) {
  (void)seed;  // boosting here is deterministic: no row or column subsampling
  check_labels(x, y);
  if (params.n_estimators == 0) throw std::invalid_argument("gbt: n_estimators must be >= 1");
  if (!(params.learning_rate > 0.0)) throw std::invalid_argument("gbt: learning_rate must be > 0");
  if (params.max_depth < 1) throw std::invalid_argument("gbt: max_depth must be >= 1");
  ForestModel model;
  model.kind = ForestKind::gradient_boosted;
  model.gbt = params;
  model.constant_label = single_class(y);
  if (model.constant_label) return model;

  const std::size_t n = x.rows();
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1)) / static_cast<double>(n);
  model.base_score = std::log(pos / (1.0 - pos));
  std::vector<double> raw(n, model.base_score);
  model.train_loss.push_back(logistic_loss(y, raw));

  const BinMapper mapper = BinMapper::fit(x, params.max_bins);
  Binned b{n, &mapper, mapper.transform(x)};
  std::vector<double> g(n), h(n);
  for (std::size_t stage = 0; stage < params.n_estimators; ++stage) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(raw[i]);
      g[i] = p - y[i];
      h[i] = std::max(p * (1.0 - p), 1e-16);
    }
    GradTreeBuilder builder(b, g, h, params);
    DecisionTree tree = builder.run();

    // Shrink each leaf's step and halve it until that leaf's loss does not
    // go up, so the training loss is monotone stage over stage.
    std::vector<std::vector<std::size_t>> members(tree.nodes.size());
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(builder.leaf_of[i])].push_back(i);
    for (std::size_t leaf = 0; leaf < tree.nodes.size(); ++leaf) {
      if (tree.nodes[leaf].feature >= 0) continue;
      const auto& rows = members[leaf];
      double w = tree.nodes[leaf].value * params.learning_rate;
      double before = 0.0;
      for (auto i : rows) before += row_loss(y[i], raw[i]);
      for (int tries = 0; tries < 60; ++tries) {
        double after = 0.0;
        for (auto i : rows) after += row_loss(y[i], raw[i] + w);
        if (after <= before) break;
        w /= 2.0;
        if (tries == 59) w = 0.0;
      }
      tree.nodes[leaf].value = w;
      for (auto i : rows) raw[i] += w;
    }
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back(logistic_loss(y, raw));
  }
  return model;
}

std::vector<double> ForestModel::predict_proba(const Matrix& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (constant_label) {
      out[r] = static_cast<double>(*constant_label);
      continue;
    }
    const auto row = x.row(r);
    if (kind == ForestKind::random_forest) {
      double s = 0.0;
      for (const auto& t : trees) s += t.predict(row);
      out[r] = s / static_cast<double>(trees.size());
    } else {
      double z = base_score;
      for (const auto& t : trees) z += t.predict(row);
      out[r] = sigmoid(z);
    }
  }
  return out;
}

std::vector<int> ForestModel::predict(const Matrix& x) const {
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (constant_label) {
      out[r] = *constant_label;
      continue;
    }
    const auto row = x.row(r);
    if (kind == ForestKind::random_forest) {
      // Majority vote of the trees; a tree sitting exactly on 0.5 splits its
      // vote, and an even vote falls back to the mean probability.
      double ones = 0.0, zeros = 0.0, psum = 0.0;
      for (const auto& t : trees) {
        const double p = t.predict(row);
        psum += p;
        if (p > 0.5) ones += 1.0;
        else if (p < 0.5) zeros += 1.0;
        else {
          ones += 0.5;
          zeros += 0.5;
        }
      }
      if (ones != zeros) out[r] = ones > zeros ? 1 : 0;
      else out[r] = psum / static_cast<double>(trees.size()) > 0.5 ? 1 : 0;
    } else {
      double z = base_score;
      for (const auto& t : trees) z += t.predict(row);
      out[r] = sigmoid(z) > 0.5 ? 1 : 0;
    }
  }
  return out;
}

std::vector<int> forest_predict(const ForestModel& model, const Matrix& x) { return model.predict(x); }

double logistic_loss(const std::vector<int>& y, const std::vector<double>& raw) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += row_loss(y[i], raw[i]);
  return y.empty() ? 0.0 : s / static_cast<double>(y.size());
}

}  // namespace edgepipe
