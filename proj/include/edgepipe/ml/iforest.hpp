#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgepipe/common/matrix.hpp"
#include "edgepipe/ml/exec.hpp"
#include "json.hpp"

namespace edgepipe {

// Average path length of an unsuccessful BST search over n points:
// c(1) = 0, c(2) = 1, c(n) = 2 H(n-1) - 2 (n-1) / n with H(i) ~ ln i + gamma.
double average_path_length(std::size_t n);

// ceil(n * contamination), treating values within 1e-9 of an integer as
// that integer so products like 100 * 0.07 do not round up spuriously.
std::size_t contamination_count(std::size_t n, double contamination);

struct ITreeNode {
  int feature = -1;  // -1 marks a leaf
  double split = 0.0;
  int left = -1;   // x[feature] < split
  int right = -1;
  std::uint32_t size = 0;  // training points that reached this node
};

struct IsolationTree {
  std::vector<ITreeNode> nodes;

  // Edges to the leaf plus c(leaf size).
  double path_length(std::span<const double> x) const;
  int depth() const;
};

struct IsolationForestParams {
  std::size_t n_trees = 100;
  std::size_t subsample = 256;
  double contamination = 0.05;
  std::uint64_t seed = 0;
};

struct IsolationForestModel {
  IsolationForestParams params;
  std::size_t psi = 0;
  int height_limit = 0;
  std::vector<IsolationTree> trees;
  double threshold = 0.5;
  std::vector<std::string> feature_schema;
  std::size_t training_rows = 0;
  std::size_t training_flagged = 0;

  double score(std::span<const double> x) const;
  // -1 iff score > threshold, else +1.
  int verdict(std::span<const double> x) const;
  int verdict_for_score(double s) const { return s > threshold ? -1 : 1; }

  nlohmann::json to_json() const;
  static IsolationForestModel from_json(const nlohmann::json& j);
};

struct IsolationForestFit {
  IsolationForestModel model;
  std::vector<double> training_scores;
  // Exactly contamination_count(n) entries are -1: the top scores, ties
  // broken by lower row index.
  std::vector<int> training_verdicts;
};

// Throws std::invalid_argument unless n >= 2 and 0 < contamination < 0.5.
IsolationForestFit iforest_fit(const Matrix& x, const std::vector<std::string>& schema,
                               const IsolationForestParams& params, Exec exec = Exec::parallel);

// Throws std::invalid_argument on a column count mismatch.
std::vector<double> iforest_scores(const IsolationForestModel& model, const Matrix& x,
                                   Exec exec = Exec::parallel);

// Rank-based flags: the k highest scores (ties to lower index) get -1.
std::vector<int> flag_top_k(const std::vector<double>& scores, std::size_t k);
// Midpoint between the k-th and (k+1)-th highest score, or the shared
// value when they tie.
double threshold_for_top_k(const std::vector<double>& scores, std::size_t k);

}  // namespace edgepipe
