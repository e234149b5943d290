#include "edgepipe/experiment/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "edgepipe/common/csv.hpp"
#include "edgepipe/common/errors.hpp"
#include "edgepipe/common/rng.hpp"
#include "edgepipe/ml/smote.hpp"
#include "edgepipe/preprocess/split.hpp"

namespace edgepipe {

namespace {

const std::set<std::string> kConfigKeys = {
    "dataset",        "synthetic.rows",     "synthetic.positive_rate", "synthetic.ambiguous_rate",
    "synthetic.ambiguous_positive_share",   "synthetic.null_rate",     "synthetic.seed",
    "smote.target",   "smote.k_neighbors",  "models",                  "trials",
    "split_ratio",    "inner_split_ratio",  "seed",                    "record_timing"};

ForestKind forest_kind_from(const std::string& name) {
  if (name == "random_forest" || name == "rf") return ForestKind::random_forest;
  if (name == "gradient_boosted" || name == "gbt") return ForestKind::gradient_boosted;
  throw DataError("experiment: unknown model '" + name + "' (random_forest, gradient_boosted)");
}

struct Fold {
  Matrix x;
  std::vector<int> y;
  std::vector<std::string> ids;
};

Fold take(const LabeledData& d, const std::vector<std::size_t>& idx) {
  Fold f;
  f.x = d.features.values.select_rows(idx);
  f.y.reserve(idx.size());
  for (auto i : idx) {
    f.y.push_back(d.labels[i]);
    f.ids.push_back(d.features.row_ids[i]);
  }
  return f;
}

std::size_t positives(const std::vector<int>& y) {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

// Appends SMOTE rows for the minority class (label 1) up to target.
std::size_t oversample(Fold& f, std::size_t target, std::size_t k, std::uint64_t seed,
                       std::vector<std::string>* audit_ids) {
  std::vector<std::size_t> minority_idx;
  for (std::size_t i = 0; i < f.y.size(); ++i) {
    if (f.y[i] == 1) minority_idx.push_back(i);
  }
  if (minority_idx.size() < k + 1) {
    throw DataError("experiment: minority class has " + std::to_string(minority_idx.size()) +
                    " rows, SMOTE needs at least k_neighbors+1 = " + std::to_string(k + 1));
  }
  if (audit_ids) {
    for (auto i : minority_idx) audit_ids->push_back(f.ids[i]);
  }
  if (target <= minority_idx.size()) return 0;
  SmoteParams p;
  p.k_neighbors = k;
  p.target_count = target;
  p.seed = seed;
  const auto res = smote(f.x.select_rows(minority_idx), p);
  for (std::size_t r = 0; r < res.synthetic.rows(); ++r) {
    f.x.append_row(res.synthetic.row(r));
    f.y.push_back(1);
    f.ids.push_back("smote" + std::to_string(r + 1));
  }
  return res.synthetic.rows();
}

ForestModel fit(ForestKind kind, const ParamPoint& p, const Fold& f, std::uint64_t seed) {
  if (kind == ForestKind::random_forest) return rf_fit(f.x, f.y, rf_params_from(p), seed);
  return gbt_fit(f.x, f.y, gbt_params_from(p), seed);
}

std::size_t scaled_target(std::size_t target, std::size_t part_pos, std::size_t fold_pos) {
  if (fold_pos == 0) return part_pos;
  const auto t = static_cast<std::size_t>(
      std::llround(static_cast<double>(target) * static_cast<double>(part_pos) / static_cast<double>(fold_pos)));
  return std::max(t, part_pos);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw DataError("experiment: split_ratio must be in (0, 1)");
  if (!(inner_split_ratio > 0.0 && inner_split_ratio < 1.0)) {
    throw DataError("experiment: inner_split_ratio must be in (0, 1)");
  }
  if (trials < 1) throw DataError("experiment: trials must be >= 1");
  if (models.empty()) throw DataError("experiment: no models");
  if (smote_k < 1) throw DataError("experiment: smote.k_neighbors must be >= 1");
}

ExperimentConfig ExperimentConfig::from_config(const KvConfig& kv, const std::filesystem::path& base_dir) {
  for (const auto& key : kv.keys()) {
    if (!kConfigKeys.count(key)) throw DataError(kv.source() + ": unknown key '" + key + "'");
  }
  ExperimentConfig c;
  const auto dataset = kv.get_string("dataset", "synthetic");
  if (dataset != "synthetic") {
    c.dataset = dataset;
    if (c.dataset.is_relative() && !base_dir.empty()) c.dataset = base_dir / c.dataset;
  }
  auto count = [&](const std::string& key, std::size_t fallback) {
    const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw DataError(kv.source() + ": " + key + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  c.synthetic.rows = count("synthetic.rows", c.synthetic.rows);
  c.synthetic.positive_rate = kv.get_double("synthetic.positive_rate", c.synthetic.positive_rate);
  c.synthetic.ambiguous_rate = kv.get_double("synthetic.ambiguous_rate", c.synthetic.ambiguous_rate);
  c.synthetic.ambiguous_positive_share =
      kv.get_double("synthetic.ambiguous_positive_share", c.synthetic.ambiguous_positive_share);
  c.synthetic.null_rate = kv.get_double("synthetic.null_rate", c.synthetic.null_rate);
  c.synthetic.seed = static_cast<std::uint64_t>(kv.get_int("synthetic.seed", 1));
  if (kv.has("smote.target")) c.smote_target = count("smote.target", 0);
  c.smote_k = count("smote.k_neighbors", c.smote_k);
  if (auto models = kv.get("models")) {
    c.models.clear();
    for (const auto& m : split_list(*models)) c.models.push_back(forest_kind_from(m));
  }
  c.trials = count("trials", c.trials);
  c.split_ratio = kv.get_double("split_ratio", c.split_ratio);
  c.inner_split_ratio = kv.get_double("inner_split_ratio", c.inner_split_ratio);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  c.record_timing = kv.get_bool("record_timing", true);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_config(KvConfig::load(path), path.parent_path());
}

bool LeakageAudit::disjoint() const {
  const std::set<std::string> test(test_ids.begin(), test_ids.end());
  for (const auto* ids : {&encoder_fit_ids, &smote_input_ids}) {
    for (const auto& id : *ids) {
      if (test.count(id)) return false;
    }
  }
  return true;
}

const ExperimentCell& ExperimentReport::cell(ForestKind model, bool smote) const {
  for (const auto& c : cells) {
    if (c.model == model && c.smote == smote) return c;
  }
  throw std::out_of_range("experiment report: no such cell");
}

void ExperimentReport::write_csv(std::ostream& out) const {
  write_csv_row(out, {"model", "smote", "tp", "tn", "fp", "fn", "acc", "prec", "rec", "f1", "fit_seconds"});
  for (const auto& c : cells) {
    const auto& cm = c.scores.cm;
    write_csv_row(out, {std::string(forest_kind_name(c.model)), c.smote ? "1" : "0", std::to_string(cm.tp),
                        std::to_string(cm.tn), std::to_string(cm.fp), std::to_string(cm.fn),
                        format_double(c.scores.accuracy), format_double(c.scores.precision),
                        format_double(c.scores.recall), format_double(c.scores.f1), format_double(c.fit_seconds)});
  }
}

SearchSpace rf_search_space() {
  return {ParamDim::integer("n_estimators", 10, 200),      ParamDim::integer("max_depth", 2, 20),
          ParamDim::real("max_features", 0.1, 1.0),        ParamDim::integer("min_samples_split", 2, 10),
          ParamDim::integer("min_samples_leaf", 1, 5),     ParamDim::categorical("criterion", {"gini", "entropy"})};
}

SearchSpace gbt_search_space() {
  return {ParamDim::integer("n_estimators", 10, 200), ParamDim::integer("max_depth", 2, 8),
          ParamDim::real("learning_rate", 0.01, 0.5)};
}

RfParams rf_params_from(const ParamPoint& p) {
  RfParams r;
  r.n_estimators = static_cast<std::size_t>(p.at("n_estimators"));
  r.max_depth = static_cast<int>(p.at("max_depth"));
  r.max_features = p.at("max_features");
  r.min_samples_split = static_cast<std::size_t>(p.at("min_samples_split"));
  r.min_samples_leaf = static_cast<std::size_t>(p.at("min_samples_leaf"));
  r.criterion = p.at("criterion") == 0.0 ? Criterion::gini : Criterion::entropy;
  return r;
}

GbtParams gbt_params_from(const ParamPoint& p) {
  GbtParams g;
  g.n_estimators = static_cast<std::size_t>(p.at("n_estimators"));
  g.max_depth = static_cast<int>(p.at("max_depth"));
  g.learning_rate = p.at("learning_rate");
  return g;
}

ExperimentReport run_experiment(const std::vector<LabeledEvent>& events, const ExperimentConfig& cfg) {
  cfg.validate();
  if (events.size() < 4) throw DataError("experiment: need at least 4 rows");
  std::vector<int> labels;
  labels.reserve(events.size());
  for (const auto& e : events) labels.push_back(normality_code(e.normality));
  const auto n_pos = positives(labels);
  if (n_pos == 0 || n_pos == labels.size()) throw DataError("experiment: dataset has a single class");

  ExperimentReport rep;
  rep.rows = events.size();
  rep.positives = n_pos;
  const auto outer = split_indices(events.size(), cfg.split_ratio, derive_seed(cfg.seed, 1), &labels);
  rep.train_rows = outer.train.size();
  rep.test_rows = outer.test.size();

  std::vector<LabeledEvent> train_events;
  train_events.reserve(outer.train.size());
  for (auto i : outer.train) {
    train_events.push_back(events[i]);
    rep.audit.encoder_fit_ids.push_back(events[i].id);
  }
  const auto encoder = LabelEncoder::fit(train_events);
  // The model sees the 11 encoded columns; the raw timestamp is not a feature.
  auto data = clean_labeled(events, encoder);
  std::vector<std::string> encoded(data.features.column_names.begin(), data.features.column_names.end() - 1);
  data.features = data.features.select_columns(encoded);
  const Fold train = take(data, outer.train);
  const Fold test = take(data, outer.test);
  rep.audit.test_ids = test.ids;

  const auto inner = split_indices(train.y.size(), cfg.inner_split_ratio, derive_seed(cfg.seed, 2), &train.y);
  auto sub = [&](const std::vector<std::size_t>& idx) {
    Fold f;
    f.x = train.x.select_rows(idx);
    for (auto i : idx) {
      f.y.push_back(train.y[i]);
      f.ids.push_back(train.ids[i]);
    }
    return f;
  };
  const Fold inner_train = sub(inner.train);
  const Fold inner_val = sub(inner.test);

  std::vector<bool> smote_modes = {false};
  if (cfg.smote_target) smote_modes.push_back(true);

  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    for (bool use_smote : smote_modes) {
      const auto kind = cfg.models[m];
      const std::uint64_t cell_seed = derive_seed(cfg.seed, 100 + 2 * m + (use_smote ? 1 : 0));
      ExperimentCell cell;
      cell.model = kind;
      cell.smote = use_smote;
      const auto t0 = std::chrono::steady_clock::now();

      Fold tune = inner_train;
      Fold full = train;
      if (use_smote) {
        const auto inner_target = scaled_target(*cfg.smote_target, positives(tune.y), positives(train.y));
        oversample(tune, inner_target, cfg.smote_k, derive_seed(cell_seed, 1), &rep.audit.smote_input_ids);
        cell.synthetic_rows =
            oversample(full, *cfg.smote_target, cfg.smote_k, derive_seed(cell_seed, 2), &rep.audit.smote_input_ids);
      }
      const auto space = kind == ForestKind::random_forest ? rf_search_space() : gbt_search_space();
      std::size_t trial = 0;
      const auto objective = [&](const ParamPoint& p) {
        const auto model = fit(kind, p, tune, derive_seed(cell_seed, 1000 + trial++));
        return 1.0 - evaluate(inner_val.y, model.predict(inner_val.x)).accuracy;
      };
      const auto search = tpe_minimize(space, objective, cfg.trials, derive_seed(cell_seed, 3));
      cell.best_params = search.best().point;
      for (const auto& t : search.trials) cell.trial_losses.push_back(t.loss);

      const auto model = fit(kind, cell.best_params, full, derive_seed(cell_seed, 4));
      const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      cell.fit_seconds = cfg.record_timing ? std::round(elapsed * 1000.0) / 1000.0 : 0.0;
      cell.train_rows = full.y.size();
      cell.train_positives = positives(full.y);
      cell.scores = evaluate(test.y, model.predict(test.x));
      rep.cells.push_back(std::move(cell));
    }
  }
  if (!rep.audit.disjoint()) throw std::logic_error("experiment: test rows reached a fitting step");
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  std::vector<LabeledEvent> events;
  if (cfg.dataset.empty()) {
    events = synthetic_labeled(cfg.synthetic);
  } else {
    std::ifstream in(cfg.dataset);
    if (!in) throw IoError("experiment: cannot read " + cfg.dataset.string());
    events = read_labeled_csv(in);
  }
  return run_experiment(events, cfg);
}

}  // namespace edgepipe
