#include <gtest/gtest.h>

#include <cmath>

#include "edgepipe/ml/forest.hpp"
#include "edgepipe/ml/metrics.hpp"
#include "support/data.hpp"

using namespace edgepipe;
using test_support::gaussian_matrix;

namespace {

// Two overlapping blobs; label 1 on the shifted one.
void blobs(std::size_t n, std::uint64_t seed, double shift, Matrix& x, std::vector<int>& y) {
  x = gaussian_matrix(n, 3, seed);
  y.assign(n, 0);
  for (std::size_t i = 0; i < n; i += 4) {
    y[i] = 1;
    for (std::size_t c = 0; c < 3; ++c) x(i, c) += shift;
  }
}

double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ok += a[i] == b[i];
  return static_cast<double>(ok) / static_cast<double>(a.size());
}

}  // namespace

TEST(BinMapper, MidpointCutsForFewValues) {
  const Matrix x{{1.0}, {3.0}, {3.0}, {4.0}};
  const auto bm = BinMapper::fit(x, 255);
  EXPECT_EQ(bm.cuts[0], (std::vector<double>{2.0, 3.5}));
  const auto codes = bm.transform(x);
  EXPECT_EQ(codes, (std::vector<std::uint16_t>{0, 1, 1, 2}));
  const Matrix probe{{2.0}, {2.0001}};
  EXPECT_EQ(bm.transform(probe), (std::vector<std::uint16_t>{0, 1}));  // x <= cut goes left
}

TEST(BinMapper, ManyValuesCapped) {
  const auto x = gaussian_matrix(5000, 1, 3);
  const auto bm = BinMapper::fit(x, 16);
  EXPECT_LE(bm.bin_count(0), 16u);
  EXPECT_TRUE(std::is_sorted(bm.cuts[0].begin(), bm.cuts[0].end()));
}

TEST(Forest, SingleTreeFindsTheObviousSplit) {
  const Matrix x{{1.0}, {2.0}, {3.0}, {4.0}};
  const std::vector<int> y{0, 0, 1, 1};
  RfParams p;
  p.n_estimators = 1;
  p.bootstrap = false;
  const auto m = rf_fit(x, y, p, 0);
  ASSERT_EQ(m.trees.size(), 1u);
  EXPECT_EQ(m.trees[0].nodes[0].feature, 0);
  EXPECT_EQ(m.trees[0].nodes[0].threshold, 2.5);
  EXPECT_EQ(m.predict(x), y);
  const Matrix probe{{2.5}, {2.6}};
  EXPECT_EQ(m.predict(probe), (std::vector<int>{0, 1}));
}

TEST(Forest, EntropyCriterionAlsoSeparates) {
  Matrix x;
  std::vector<int> y;
  blobs(400, 1, 6.0, x, y);
  RfParams p;
  p.n_estimators = 20;
  p.criterion = Criterion::entropy;
  EXPECT_EQ(criterion_from_name("entropy"), Criterion::entropy);
  EXPECT_EQ(criterion_name(Criterion::gini), "gini");
  EXPECT_GE(accuracy(rf_fit(x, y, p, 3).predict(x), y), 0.99);
}

TEST(Forest, RandomForestGeneralises) {
  Matrix x, xt;
  std::vector<int> y, yt;
  blobs(1000, 2, 2.5, x, y);
  blobs(1000, 3, 2.5, xt, yt);
  RfParams p;
  p.n_estimators = 50;
  p.max_features = 0.67;
  const auto m = rf_fit(x, y, p, 4);
  EXPECT_GE(accuracy(m.predict(xt), yt), 0.9);
  const auto proba = m.predict_proba(xt);
  for (double v : proba) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  // Same seed, same model.
  EXPECT_EQ(rf_fit(x, y, p, 4).predict_proba(xt), proba);
}

TEST(Forest, GradientBoostingLossNeverIncreases) {
  Matrix x;
  std::vector<int> y;
  blobs(800, 5, 2.0, x, y);
  GbtParams p;
  p.n_estimators = 60;
  p.learning_rate = 0.5;
  const auto m = gbt_fit(x, y, p, 0);
  ASSERT_EQ(m.train_loss.size(), p.n_estimators + 1);
  // Base score is the log-odds of the positive rate.
  EXPECT_NEAR(m.base_score, std::log(200.0 / 600.0), 1e-12);
  EXPECT_NEAR(m.train_loss[0], logistic_loss(y, std::vector<double>(y.size(), m.base_score)), 1e-12);
  for (std::size_t i = 1; i < m.train_loss.size(); ++i) {
    ASSERT_LE(m.train_loss[i], m.train_loss[i - 1] + 1e-12) << i;
  }
  EXPECT_LT(m.train_loss.back(), 0.5 * m.train_loss.front());
}

TEST(Forest, GradientBoostingLearnsXor) {
  Matrix x;
  std::vector<int> y;
  Rng rng = make_rng(6);
  for (int i = 0; i < 400; ++i) {
    const double a = uniform01(rng) * 2 - 1, b = uniform01(rng) * 2 - 1;
    const double row[] = {a, b};
    x.append_row(row);
    y.push_back((a > 0) != (b > 0));
  }
  GbtParams p;
  p.n_estimators = 80;
  p.max_depth = 2;
  p.learning_rate = 0.3;
  EXPECT_GE(accuracy(gbt_fit(x, y, p, 0).predict(x), y), 0.97);
}

TEST(Forest, SingleClassLabelsGiveConstantModel) {
  const auto x = gaussian_matrix(30, 2, 1);
  const std::vector<int> ones(30, 1);
  const auto rf = rf_fit(x, ones, {}, 0);
  EXPECT_EQ(rf.constant_label, 1);
  EXPECT_EQ(rf.predict(x), ones);
  const auto gb = gbt_fit(x, std::vector<int>(30, 0), {}, 0);
  EXPECT_EQ(gb.constant_label, 0);
  EXPECT_EQ(forest_predict(gb, x), std::vector<int>(30, 0));
}

TEST(Forest, RejectsBadLabels) {
  const auto x = gaussian_matrix(4, 1, 1);
  EXPECT_THROW(rf_fit(x, {0, 1, 2, 0}, {}, 0), std::invalid_argument);
  EXPECT_THROW(gbt_fit(x, {0, 1}, {}, 0), std::invalid_argument);
}

TEST(ForestProperty, MaxDepthAndMinLeafRespected) {
  Matrix x;
  std::vector<int> y;
  blobs(500, 8, 1.0, x, y);
  for (int depth : {1, 2, 4}) {
    RfParams p;
    p.n_estimators = 5;
    p.max_depth = depth;
    p.min_samples_leaf = 7;
    const auto m = rf_fit(x, y, p, depth);
    for (const auto& t : m.trees) ASSERT_LE(t.depth(), depth);
  }
  GbtParams g;
  g.n_estimators = 5;
  g.max_depth = 2;
  for (const auto& t : gbt_fit(x, y, g, 0).trees) ASSERT_LE(t.depth(), 2);
}

TEST(Forest, SeparableToySetIsFitExactlyByBothKinds) {
  Matrix x;
  std::vector<int> y;
  Rng rng = make_rng(10);
  for (int i = 0; i < 200; ++i) {
    const double a = uniform01(rng) * 10, b = uniform01(rng) * 10;
    if (std::abs(a + b - 10) < 3.0) continue;  // margin
    const double row[] = {a, b};
    x.append_row(row);
    y.push_back(a + b > 10);
  }
  RfParams rp;
  rp.n_estimators = 20;
  rp.max_depth = 3;
  GbtParams gp;
  gp.n_estimators = 20;
  gp.max_depth = 3;
  gp.learning_rate = 0.5;
  EXPECT_EQ(accuracy(rf_fit(x, y, rp, 1).predict(x), y), 1.0);
  EXPECT_EQ(accuracy(gbt_fit(x, y, gp, 1).predict(x), y), 1.0);
}

TEST(Forest, OneFullTreeWithAllFeaturesReproducesLabels) {
  Matrix x;
  std::vector<int> y;
  blobs(300, 12, 0.5, x, y);
  RfParams p;
  p.n_estimators = 1;
  p.bootstrap = false;
  const auto m = rf_fit(x, y, p, 2);
  EXPECT_EQ(m.predict(x), y);
  EXPECT_EQ(m.trees.size(), 1u);
}
