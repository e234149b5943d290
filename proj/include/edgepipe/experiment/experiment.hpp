#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "edgepipe/common/kv_config.hpp"
#include "edgepipe/experiment/synthetic.hpp"
#include "edgepipe/ml/forest.hpp"
#include "edgepipe/ml/metrics.hpp"
#include "edgepipe/ml/tpe.hpp"
#include "edgepipe/preprocess/labeled.hpp"

namespace edgepipe {

struct ExperimentConfig {
  // Empty dataset means the built-in synthetic generator.
  std::filesystem::path dataset;
  SyntheticLabeledOptions synthetic;
  // Minority count after oversampling the training fold; unset runs the
  // no-SMOTE cells only.
  std::optional<std::size_t> smote_target;
  std::size_t smote_k = 5;
  std::vector<ForestKind> models = {ForestKind::random_forest, ForestKind::gradient_boosted};
  std::size_t trials = 20;
  double split_ratio = 0.7;
  double inner_split_ratio = 0.8;  // tuning: inner train / validation
  std::uint64_t seed = 1;
  // When false fit_seconds is reported as 0 so reports compare byte-for-byte.
  bool record_timing = true;

  // Throws DataError on ratios outside (0, 1), trials == 0 or no models.
  void validate() const;
  // Relative dataset paths resolve against base_dir.
  static ExperimentConfig from_config(const KvConfig& kv, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
};

// Row ids that reached each fitting step; test ids must be disjoint from
// every other set.
struct LeakageAudit {
  std::vector<std::string> test_ids;
  std::vector<std::string> encoder_fit_ids;
  std::vector<std::string> smote_input_ids;  // union over SMOTE cells
  bool disjoint() const;
};

struct ExperimentCell {
  ForestKind model = ForestKind::random_forest;
  bool smote = false;
  std::size_t train_rows = 0;       // after oversampling
  std::size_t train_positives = 0;  // after oversampling
  std::size_t synthetic_rows = 0;
  Scores scores;
  double fit_seconds = 0.0;  // TPE search plus the final fit
  ParamPoint best_params;
  std::vector<double> trial_losses;
};

struct ExperimentReport {
  std::size_t rows = 0;
  std::size_t positives = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::vector<ExperimentCell> cells;
  LeakageAudit audit;

  const ExperimentCell& cell(ForestKind model, bool smote) const;

  // model,smote,tp,tn,fp,fn,acc,prec,rec,f1,fit_seconds
  void write_csv(std::ostream& out) const;
};

SearchSpace rf_search_space();
SearchSpace gbt_search_space();
RfParams rf_params_from(const ParamPoint& p);
GbtParams gbt_params_from(const ParamPoint& p);

// Stratified outer split, encoder fit on the training fold, TPE on an inner
// validation split (SMOTE applied to the inner train part when enabled),
// final fit on the whole (oversampled) training fold, scored on the
// untouched test fold. Throws DataError when the minority class is smaller
// than smote_k + 1 with SMOTE enabled, or the data has a single class.
ExperimentReport run_experiment(const std::vector<LabeledEvent>& events, const ExperimentConfig& cfg);
// Loads cfg.dataset (or generates the synthetic set) and runs.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace edgepipe
