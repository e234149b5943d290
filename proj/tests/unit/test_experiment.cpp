#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "edgepipe/common/errors.hpp"
#include "edgepipe/experiment/experiment.hpp"
#include "support/temp_dir.hpp"

using namespace edgepipe;
using test_support::TempDir;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.synthetic.rows = 3000;
  c.trials = 3;
  c.smote_target = 400;
  c.record_timing = false;
  return c;
}

bool is_corner(const LabeledEvent& e) {
  return e.categorical[2] == "/batteryService" && e.categorical[5] == "/thermostat" && e.categorical[9] == "write";
}

}  // namespace

TEST(Synthetic, ExactPositiveCountAndCorner) {
  SyntheticLabeledOptions o;
  o.rows = 6000;
  const auto ev = synthetic_labeled(o);
  ASSERT_EQ(ev.size(), 6000u);
  std::size_t pos = 0, corner = 0, corner_pos = 0, nulls = 0;
  for (const auto& e : ev) {
    pos += normality_code(e.normality);
    if (is_corner(e)) {
      ++corner;
      corner_pos += normality_code(e.normality);
    }
    if (!e.categorical[10] || !e.categorical[8]) ++nulls;
  }
  EXPECT_EQ(pos, 120u);
  EXPECT_EQ(corner, 100u);
  EXPECT_EQ(corner_pos, 30u);
  EXPECT_GT(nulls, 0u);
  for (std::size_t i = 1; i < ev.size(); ++i) EXPECT_LT(*ev[i - 1].timestamp, *ev[i].timestamp);
}

TEST(Synthetic, RuleAnomaliesNeverLookNormal) {
  const auto ev = synthetic_labeled({});
  std::set<std::string> normal_nodes, attack_nodes;
  for (const auto& e : ev) {
    if (is_corner(e)) continue;
    (e.normality == "normal" ? normal_nodes : attack_nodes).insert(*e.categorical[7]);
  }
  for (const auto& n : attack_nodes) EXPECT_FALSE(normal_nodes.count(n)) << n;
}

TEST(Synthetic, DeterministicAndCsvRoundTrip) {
  SyntheticLabeledOptions o;
  o.rows = 500;
  o.seed = 9;
  const auto a = synthetic_labeled(o);
  std::ostringstream s1, s2;
  write_labeled_csv(s1, a);
  write_labeled_csv(s2, synthetic_labeled(o));
  EXPECT_EQ(s1.str(), s2.str());
  std::istringstream in(s1.str());
  const auto back = read_labeled_csv(in);
  ASSERT_EQ(back.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(back[i].normality, a[i].normality);
    EXPECT_EQ(back[i].timestamp, a[i].timestamp);
    for (std::size_t c = 0; c < kLabeledFeatureCount; ++c) {
      EXPECT_EQ(filled_category(c, back[i].categorical[c]), filled_category(c, a[i].categorical[c]));
    }
  }
}

TEST(Synthetic, RejectsImpossibleBudgets) {
  SyntheticLabeledOptions o;
  o.positive_rate = 0.001;
  EXPECT_THROW(synthetic_labeled(o), std::invalid_argument);
  o = {};
  o.rows = 5;
  EXPECT_THROW(synthetic_labeled(o), std::invalid_argument);
}

TEST(ExperimentConfig, ParsesShippedConfig) {
  const auto c = ExperimentConfig::load(std::filesystem::path(EDGEPIPE_SOURCE_DIR) / "config/experiment/synthetic.conf");
  EXPECT_TRUE(c.dataset.empty());
  EXPECT_EQ(c.trials, 20u);
  ASSERT_TRUE(c.smote_target);
  EXPECT_EQ(*c.smote_target, 1500u);
  EXPECT_EQ(c.models.size(), 2u);
  EXPECT_DOUBLE_EQ(c.split_ratio, 0.7);
}

TEST(ExperimentConfig, RejectsBadValues) {
  auto parse = [](const std::string& text) {
    return ExperimentConfig::from_config(KvConfig::parse_string(text, "t.conf"), "/data");
  };
  EXPECT_THROW(parse("split_ratio = 1.0\n"), DataError);
  EXPECT_THROW(parse("split_ratio = 0\n"), DataError);
  EXPECT_THROW(parse("trials = 0\n"), DataError);
  EXPECT_THROW(parse("models = svm\n"), DataError);
  EXPECT_THROW(parse("smote.targte = 5\n"), DataError);
  EXPECT_EQ(parse("dataset = x.csv\n").dataset, std::filesystem::path("/data/x.csv"));
  EXPECT_FALSE(parse("trials = 2\n").smote_target);
}

TEST(Experiment, SingleCellWithoutSmote) {
  ExperimentConfig c = small_config();
  c.smote_target.reset();
  c.models = {ForestKind::gradient_boosted};
  c.trials = 1;
  const auto rep = run_experiment(c);
  ASSERT_EQ(rep.cells.size(), 1u);
  EXPECT_FALSE(rep.cells[0].smote);
  EXPECT_EQ(rep.cells[0].trial_losses.size(), 1u);
  EXPECT_EQ(rep.cells[0].scores.cm.total(), rep.test_rows);
  EXPECT_TRUE(rep.audit.smote_input_ids.empty());
  std::ostringstream out;
  rep.write_csv(out);
  const auto text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST(Experiment, NoLeakageIntoFitting) {
  const auto rep = run_experiment(small_config());
  ASSERT_EQ(rep.cells.size(), 4u);
  EXPECT_TRUE(rep.audit.disjoint());
  const std::set<std::string> test(rep.audit.test_ids.begin(), rep.audit.test_ids.end());
  const std::set<std::string> enc(rep.audit.encoder_fit_ids.begin(), rep.audit.encoder_fit_ids.end());
  EXPECT_EQ(test.size() + enc.size(), rep.rows);
  for (const auto& id : rep.audit.smote_input_ids) {
    EXPECT_TRUE(enc.count(id));
    EXPECT_FALSE(test.count(id));
  }
  for (const auto& cell : rep.cells) {
    EXPECT_EQ(cell.scores.cm.total(), rep.test_rows);
    if (cell.smote) {
      EXPECT_EQ(cell.train_positives, 400u);
      EXPECT_EQ(cell.train_rows, rep.train_rows + cell.synthetic_rows);
    } else {
      EXPECT_EQ(cell.synthetic_rows, 0u);
    }
  }
}

TEST(Experiment, ReportIsReproducible) {
  std::ostringstream a, b;
  run_experiment(small_config()).write_csv(a);
  run_experiment(small_config()).write_csv(b);
  EXPECT_EQ(a.str(), b.str());
  auto other = small_config();
  other.seed = 2;
  std::ostringstream c;
  run_experiment(other).write_csv(c);
  EXPECT_NE(a.str(), c.str());
}

TEST(Experiment, ScoresRecomputeFromConfusion) {
  const auto rep = run_experiment(small_config());
  std::ostringstream out;
  rep.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "model,smote,tp,tn,fp,fn,acc,prec,rec,f1,fit_seconds");
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    ASSERT_EQ(f.size(), 11u);
    const double tp = std::stod(f[2]), tn = std::stod(f[3]), fp = std::stod(f[4]), fn = std::stod(f[5]);
    EXPECT_EQ(std::stod(f[6]), (tp + tn) / (tp + tn + fp + fn));
    EXPECT_EQ(std::stod(f[7]), tp + fp > 0 ? tp / (tp + fp) : 0.0);
    EXPECT_EQ(std::stod(f[8]), tp + fn > 0 ? tp / (tp + fn) : 0.0);
    const double f1 = 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    EXPECT_NEAR(std::stod(f[9]), f1, 1e-12);
    EXPECT_EQ(f[10], "0");
  }
}

TEST(Experiment, SmoteNeedsEnoughMinorityRows) {
  SyntheticLabeledOptions o;
  o.rows = 400;
  o.positive_rate = 0.02;
  o.ambiguous_rate = 0.01;
  auto ev = synthetic_labeled(o);  // 8 positives, about 5 in the training fold
  ExperimentConfig c = small_config();
  c.trials = 1;
  EXPECT_THROW(run_experiment(ev, c), DataError);
  c.smote_target.reset();
  EXPECT_NO_THROW(run_experiment(ev, c));
}

TEST(Experiment, SchemaMismatchIsDataError) {
  TempDir dir;
  {
    std::ofstream out(dir / "bad.csv");
    out << "sourceID,sourceAddress,normality\na,b,normal\n";
  }
  ExperimentConfig c = small_config();
  c.dataset = dir / "bad.csv";
  EXPECT_THROW(run_experiment(c), DataError);
  c.dataset = dir / "missing.csv";
  EXPECT_THROW(run_experiment(c), IoError);
}

TEST(Experiment, SmoteRaisesRecallAndShiftsErrorType) {
  auto c = ExperimentConfig::load(std::filesystem::path(EDGEPIPE_SOURCE_DIR) / "config/experiment/synthetic.conf");
  c.record_timing = false;
  const auto rep = run_experiment(c);
  for (auto kind : {ForestKind::random_forest, ForestKind::gradient_boosted}) {
    const auto& before = rep.cell(kind, false).scores;
    const auto& after = rep.cell(kind, true).scores;
    EXPECT_GE(before.accuracy, 0.97);
    EXPECT_GE(after.accuracy, 0.97);
    EXPECT_GT(after.recall, before.recall);
    EXPECT_GT(before.cm.fn, before.cm.fp);
    EXPECT_GT(after.cm.fp, after.cm.fn);
  }
}
