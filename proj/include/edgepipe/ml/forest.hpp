#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgepipe/common/matrix.hpp"

namespace edgepipe {

enum class Criterion { gini, entropy };
std::string_view criterion_name(Criterion c);
std::optional<Criterion> criterion_from_name(std::string_view name);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf: P(class 1) for forests, additive weight for boosting
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  double predict(std::span<const double> x) const;
  int depth() const;
};

// Per-feature cut points. Features with at most max_bins distinct values
// get a cut between every pair of neighbours, so splits are exact; wider
// features are cut at evenly spaced distinct values.
struct BinMapper {
  std::vector<std::vector<double>> cuts;

  static BinMapper fit(const Matrix& x, std::size_t max_bins);
  std::size_t bin_count(std::size_t feature) const { return cuts[feature].size() + 1; }
  // Column-major bin codes: out[f * rows + r].
  std::vector<std::uint16_t> transform(const Matrix& x) const;
};

struct RfParams {
  std::size_t n_estimators = 100;
  int max_depth = -1;  // -1: grow until pure or limited by the sample rules
  double max_features = 1.0;  // fraction of features examined per split
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  Criterion criterion = Criterion::gini;
  bool bootstrap = true;
  std::size_t max_bins = 255;
};

struct GbtParams {
  std::size_t n_estimators = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double lambda = 1.0;  // L2 penalty on leaf weights
  std::size_t min_samples_leaf = 1;
  std::size_t max_bins = 255;
};

enum class ForestKind { random_forest, gradient_boosted };
std::string_view forest_kind_name(ForestKind k);

struct ForestModel {
  ForestKind kind = ForestKind::random_forest;
  std::vector<DecisionTree> trees;
  RfParams rf;
  GbtParams gbt;
  double base_score = 0.0;  // boosting: initial log-odds
  // Set when training labels had a single class; predictions are constant.
  std::optional<int> constant_label;
  // Boosting: training log-loss after the base score and after each stage.
  std::vector<double> train_loss;

  std::vector<double> predict_proba(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;
};

// Labels must be 0/1 and match the row count (std::invalid_argument).
ForestModel rf_fit(const Matrix& x, const std::vector<int>& y, const RfParams& params, std::uint64_t seed);
ForestModel gbt_fit(const Matrix& x, const std::vector<int>& y, const GbtParams& params, std::uint64_t seed);
std::vector<int> forest_predict(const ForestModel& model, const Matrix& x);

// Mean logistic loss of raw scores (log-odds).
double logistic_loss(const std::vector<int>& y, const std::vector<double>& raw);

}  // namespace edgepipe
