#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edgepipe/ml/artifact.hpp"
#include "edgepipe/orchestrator/executor.hpp"
#include "edgepipe/orchestrator/registry.hpp"
#include "edgepipe/preprocess/sensor_clean.hpp"
#include "edgepipe/preprocess/split.hpp"
#include "edgepipe/warehouse/warehouse.hpp"

namespace edgepipe {

struct TrainingOptions {
  IsolationForestParams iforest;  // contamination 0.05 by default
  KMeansParams kmeans;            // k = 4
  double split_ratio = 0.7;
  std::uint64_t seed = 0;
  std::size_t page_budget = kDefaultPageBudget;
  // Standardize the flagged rows before k-means. Detectors always see raw
  // readings; cluster reports are always in raw units.
  bool zscore_kmeans = false;
  std::size_t min_station_rows = 20;  // stations with fewer cleaned rows get no model
  StationCodes codes;
  ApprovalCriteria approval;
  bool auto_approve = true;
};

// Per-station intermediate state of one run.
struct StationTraining {
  std::string station;
  FeatureMatrix rows;  // the 17 readings, row_ids = sample_id
  SplitIndices split;
  IsolationForestFit fit;
  std::size_t test_flagged = 0;
  std::vector<bool> anomaly_mask;  // over all rows
  std::optional<KMeansModel> kmeans;
  std::optional<ClusterReport> report;
};

// The retraining workflow: scan -> clean -> split -> train -> {evaluate,
// cluster} -> publish -> approve -> deploy. tasks() returns the task bodies
// for execute_run; state is reset by each call to tasks().
class TrainingPipeline {
 public:
  using Clock = std::function<std::int64_t()>;  // epoch seconds
  using Deploy = std::function<void(const ModelArtifact&)>;

  TrainingPipeline(SampleTable& table, ModelRegistry& registry, TrainingOptions options, Clock clock,
                   Deploy deploy = {});

  std::map<std::string, TaskFn> tasks();

  // The DAG these tasks are written for (same text as config/dag/retrain.conf).
  static const char* default_dag_text();
  static DagSpec default_dag();

  // Results of the most recent run.
  const std::vector<SensorSample>& scanned() const { return scanned_; }
  std::size_t scan_pages() const { return scan_pages_; }
  const SensorCleanResult& cleaned() const { return cleaned_; }
  const std::map<std::string, StationTraining>& stations() const { return stations_; }
  std::optional<std::int64_t> version() const { return version_; }
  const std::optional<ApprovalOutcome>& approval() const { return approval_; }
  bool deployed() const { return deployed_; }
  const TrainingOptions& options() const { return options_; }

 private:
  void reset();
  void scan(TaskContext& ctx);
  void clean(TaskContext& ctx);
  void split(TaskContext& ctx);
  void train(TaskContext& ctx);
  void evaluate(TaskContext& ctx);
  void cluster(TaskContext& ctx);
  void publish(TaskContext& ctx);
  void approve(TaskContext& ctx);
  void deploy(TaskContext& ctx);

  SampleTable& table_;
  ModelRegistry& registry_;
  TrainingOptions options_;
  Clock clock_;
  Deploy deploy_;

  std::vector<SensorSample> scanned_;
  std::size_t scan_pages_ = 0;
  SensorCleanResult cleaned_;
  std::map<std::string, StationTraining> stations_;
  nlohmann::json metrics_;
  std::optional<std::int64_t> version_;
  std::optional<ApprovalOutcome> approval_;
  bool deployed_ = false;
};

TrainingOptions training_options_from_config(const KvConfig& cfg);

}  // namespace edgepipe
