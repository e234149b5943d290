#include "edgepipe/orchestrator/training.hpp"

#include <algorithm>
#include <set>

#include "edgepipe/common/time_util.hpp"

namespace edgepipe {

namespace {

constexpr const char* kDefaultDag = R"(# Retraining workflow run by the orchestrator.
dag = retrain
schedule_interval = 5m  # 3d for the production cadence
run_timeout = 10m
default_max_retries = 1

task.scan.deps =
task.scan.max_retries = 2
task.clean.deps = scan
task.split.deps = clean
task.train.deps = split
task.evaluate.deps = train
task.cluster.deps = train
task.publish.deps = evaluate, cluster
task.approve.deps = publish
task.deploy.deps = approve
task.deploy.max_retries = 2
)";

std::size_t distinct_rows(const Matrix& x) {
  std::set<std::vector<double>> seen;
  for (std::size_t r = 0; r < x.rows(); ++r) seen.emplace(x.row(r).begin(), x.row(r).end());
  return seen.size();
}

}  // namespace

TrainingPipeline::TrainingPipeline(SampleTable& table, ModelRegistry& registry, TrainingOptions options, Clock clock,
                                   Deploy deploy)
    : table_(table),
      registry_(registry),
      options_(std::move(options)),
      clock_(std::move(clock)),
      deploy_(std::move(deploy)) {}

const char* TrainingPipeline::default_dag_text() { return kDefaultDag; }

DagSpec TrainingPipeline::default_dag() {
  return DagSpec::from_config(KvConfig::parse_string(kDefaultDag, "<builtin retrain dag>"));
}

void TrainingPipeline::reset() {
  scanned_.clear();
  scan_pages_ = 0;
  cleaned_ = {};
  stations_.clear();
  metrics_ = nlohmann::json::object();
  version_.reset();
  approval_.reset();
  deployed_ = false;
}

std::map<std::string, TaskFn> TrainingPipeline::tasks() {
  reset();
  auto bind = [this](void (TrainingPipeline::*fn)(TaskContext&)) {
    return [this, fn](TaskContext& ctx) { (this->*fn)(ctx); };
  };
  return {
      {"scan", bind(&TrainingPipeline::scan)},         {"clean", bind(&TrainingPipeline::clean)},
      {"split", bind(&TrainingPipeline::split)},       {"train", bind(&TrainingPipeline::train)},
      {"evaluate", bind(&TrainingPipeline::evaluate)}, {"cluster", bind(&TrainingPipeline::cluster)},
      {"publish", bind(&TrainingPipeline::publish)},   {"approve", bind(&TrainingPipeline::approve)},
      {"deploy", bind(&TrainingPipeline::deploy)},
  };
}

void TrainingPipeline::scan(TaskContext& ctx) {
  scanned_ = scan_table(table_, options_.page_budget, &scan_pages_);
  ctx.log << "scanned " << scanned_.size() << " rows in " << scan_pages_ << " pages\n";
  if (scanned_.empty()) throw TaskAbort("no data");
}

void TrainingPipeline::clean(TaskContext& ctx) {
  cleaned_ = clean_sensor(samples_to_table(scanned_), options_.codes);
  const auto touched = propagate_dedup(table_, cleaned_.dedup_kept);
  const auto& st = cleaned_.stats;
  ctx.log << "cleaned " << st.input_rows << " -> " << cleaned_.features.rows() << " rows (duplicates "
          << st.duplicates << ", zero_magnetic " << st.zero_magnetic << ", unknown_station " << st.unknown_station
          << ", bad_time " << st.bad_time << ", bad_value " << st.bad_value << "); dedup ids rewritten " << touched
          << "\n";
  if (cleaned_.features.rows() == 0) throw TaskAbort("no data");
}

void TrainingPipeline::split(TaskContext& ctx) {
  const FeatureMatrix model = sensor_model_features(cleaned_.features);
  const std::size_t station_col = cleaned_.features.column_index("station");
  const std::pair<int, std::string> codes[] = {{0, options_.codes.garage}, {1, options_.codes.bedroom}};
  for (const auto& [code, path] : codes) {
    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < cleaned_.features.rows(); ++r) {
      if (cleaned_.features.values(r, station_col) == code) idx.push_back(r);
    }
    if (idx.size() < std::max<std::size_t>(options_.min_station_rows, 2)) {
      ctx.log << path << ": " << idx.size() << " rows, below min_station_rows; no model\n";
      continue;
    }
    StationTraining st;
    st.station = path;
    st.rows = model.select_rows(idx);
    st.split = split_indices(idx.size(), options_.split_ratio, options_.seed + 1000 * static_cast<std::uint64_t>(code));
    ctx.log << path << ": train " << st.split.train.size() << ", test " << st.split.test.size() << "\n";
    stations_.emplace(path, std::move(st));
  }
  if (stations_.empty()) throw TaskAbort("no data");
}

void TrainingPipeline::train(TaskContext& ctx) {
  std::uint64_t salt = 0;
  for (auto& [path, st] : stations_) {
    IsolationForestParams p = options_.iforest;
    p.seed = options_.iforest.seed + options_.seed + 7919 * salt++;
    st.fit = iforest_fit(st.rows.values.select_rows(st.split.train), st.rows.column_names, p);
    ctx.log << path << ": threshold " << st.fit.model.threshold << ", flagged " << st.fit.model.training_flagged
            << " of " << st.fit.model.training_rows << "\n";
    if (ctx.stop.stop_requested()) throw TaskAbort("stopped");
  }
}

void TrainingPipeline::evaluate(TaskContext& ctx) {
  std::size_t flagged = 0;
  std::size_t tested = 0;
  bool stable = true;
  nlohmann::json per = nlohmann::json::object();
  for (auto& [path, st] : stations_) {
    const auto scores = iforest_scores(st.fit.model, st.rows.values.select_rows(st.split.test));
    st.test_flagged = 0;
    for (double s : scores) st.test_flagged += st.fit.model.verdict_for_score(s) == -1 ? 1 : 0;
    const bool exact =
        st.fit.model.training_flagged == contamination_count(st.fit.model.training_rows, options_.iforest.contamination);
    stable = stable && exact;
    const double rate = scores.empty() ? 0.0 : static_cast<double>(st.test_flagged) / static_cast<double>(scores.size());
    per[path] = {{"train_rows", st.split.train.size()},
                 {"train_flagged", st.fit.model.training_flagged},
                 {"test_rows", scores.size()},
                 {"test_flagged", st.test_flagged},
                 {"test_flag_rate", rate},
                 {"threshold", st.fit.model.threshold}};
    flagged += st.test_flagged;
    tested += scores.size();
    ctx.log << path << ": test flag rate " << rate << "\n";
  }
  metrics_["contamination"] = options_.iforest.contamination;
  metrics_["test_rows"] = tested;
  metrics_["test_flagged"] = flagged;
  metrics_["test_flag_rate"] = tested ? static_cast<double>(flagged) / static_cast<double>(tested) : 0.0;
  metrics_["stable"] = stable;
  metrics_["stations"] = per;
}

void TrainingPipeline::cluster(TaskContext& ctx) {
  for (auto& [path, st] : stations_) {
    const std::size_t n = st.rows.rows();
    const auto all_scores = iforest_scores(st.fit.model, st.rows.values);
    st.anomaly_mask.assign(n, false);
    std::vector<bool> in_train(n, false);
    for (std::size_t i = 0; i < st.split.train.size(); ++i) {
      in_train[st.split.train[i]] = true;
      st.anomaly_mask[st.split.train[i]] = st.fit.training_verdicts[i] == -1;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (!in_train[r]) st.anomaly_mask[r] = st.fit.model.verdict_for_score(all_scores[r]) == -1;
    }
    std::vector<std::size_t> flagged;
    for (std::size_t r = 0; r < n; ++r) {
      if (st.anomaly_mask[r]) flagged.push_back(r);
    }
    Matrix x = st.rows.values.select_rows(flagged);
    const std::size_t distinct = distinct_rows(x);
    if (distinct == 0) {
      ctx.log << path << ": no flagged rows to cluster\n";
      continue;
    }
    if (options_.zscore_kmeans) ZScoreScaler::fit(x).apply(x);
    KMeansParams kp = options_.kmeans;
    kp.k = std::min(kp.k, distinct);
    kp.seed = options_.kmeans.seed + options_.seed;
    st.kmeans = kmeans_fit(x, kp);
    std::vector<int> labels(n, -1);
    for (std::size_t i = 0; i < flagged.size(); ++i) labels[flagged[i]] = st.kmeans->labels[i];
    st.report = cluster_report(st.rows.values, st.anomaly_mask, labels, st.rows.column_names);
    ctx.log << path << ": " << flagged.size() << " flagged rows in " << kp.k << " clusters, inertia "
            << st.kmeans->inertia << "\n";
  }
}

void TrainingPipeline::publish(TaskContext& ctx) {
  ModelArtifact a;
  a.trained_at = format_iso8601(clock_());
  a.feature_schema = sensor_feature_names();
  for (auto& [path, st] : stations_) {
    a.training_rows += st.split.train.size();
    a.detectors.emplace(path, st.fit.model);
    if (st.kmeans) a.clusterers.emplace(path, *st.kmeans);
    if (st.report) a.reports.emplace(path, *st.report);
  }
  a.metrics = metrics_;
  a.metrics["cleaning"] = {{"input_rows", cleaned_.stats.input_rows},
                           {"rows", cleaned_.features.rows()},
                           {"duplicates", cleaned_.stats.duplicates},
                           {"zero_magnetic", cleaned_.stats.zero_magnetic},
                           {"unknown_station", cleaned_.stats.unknown_station},
                           {"bad_time", cleaned_.stats.bad_time},
                           {"bad_value", cleaned_.stats.bad_value}};
  a.metrics["zscore_kmeans"] = options_.zscore_kmeans;
  version_ = registry_.publish(std::move(a));
  ctx.log << "published model v" << *version_ << "\n";
}

void TrainingPipeline::approve(TaskContext& ctx) {
  if (!options_.auto_approve) {
    ctx.log << "auto approval disabled; v" << *version_ << " left unapproved\n";
    return;
  }
  approval_ = registry_.approve(*version_, options_.approval, false, format_iso8601(clock_()));
  ctx.log << "v" << *version_ << (approval_->approved ? " approved: " : " rejected: ") << approval_->reason << "\n";
}

void TrainingPipeline::deploy(TaskContext& ctx) {
  if (!approval_ || !approval_->approved) {
    ctx.log << "nothing to deploy\n";
    return;
  }
  if (!deploy_) {
    ctx.log << "no deploy target configured\n";
    return;
  }
  deploy_(registry_.load(*version_));
  deployed_ = true;
  ctx.log << "deploy of v" << *version_ << " started\n";
}

TrainingOptions training_options_from_config(const KvConfig& cfg) {
  TrainingOptions o;
  o.iforest.n_trees = static_cast<std::size_t>(cfg.get_int("iforest.n_trees", static_cast<std::int64_t>(o.iforest.n_trees)));
  o.iforest.subsample =
      static_cast<std::size_t>(cfg.get_int("iforest.subsample", static_cast<std::int64_t>(o.iforest.subsample)));
  o.iforest.contamination = cfg.get_double("contamination", o.iforest.contamination);
  o.kmeans.k = static_cast<std::size_t>(cfg.get_int("kmeans.k", static_cast<std::int64_t>(o.kmeans.k)));
  o.kmeans.n_init = static_cast<std::size_t>(cfg.get_int("kmeans.n_init", static_cast<std::int64_t>(o.kmeans.n_init)));
  o.kmeans.max_iter =
      static_cast<std::size_t>(cfg.get_int("kmeans.max_iter", static_cast<std::int64_t>(o.kmeans.max_iter)));
  o.split_ratio = cfg.get_double("split_ratio", o.split_ratio);
  o.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  o.page_budget = static_cast<std::size_t>(cfg.get_int("page_budget", static_cast<std::int64_t>(o.page_budget)));
  o.zscore_kmeans = cfg.get_bool("zscore_kmeans", false);
  o.min_station_rows =
      static_cast<std::size_t>(cfg.get_int("min_station_rows", static_cast<std::int64_t>(o.min_station_rows)));
  o.codes.garage = cfg.get_string("station.garage", o.codes.garage);
  o.codes.bedroom = cfg.get_string("station.bedroom", o.codes.bedroom);
  o.approval.contamination = o.iforest.contamination;
  o.approval.band = cfg.get_double("approval.band", o.approval.band);
  o.auto_approve = cfg.get_bool("auto_approve", true);
  return o;
}

}  // namespace edgepipe
