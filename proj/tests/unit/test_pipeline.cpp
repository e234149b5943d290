#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <thread>

#include "edgepipe/common/binary_io.hpp"
#include "edgepipe/common/errors.hpp"
#include "edgepipe/orchestrator/alerts.hpp"
#include "edgepipe/orchestrator/deployer.hpp"
#include "edgepipe/orchestrator/training.hpp"
#include "edgepipe/sensor/scenario.hpp"
#include "httplib.h"
#include "support/temp_dir.hpp"

using namespace edgepipe;
using test_support::TempDir;

namespace {

const std::string kGarage = "daniel/house/garage/pi3";
const std::string kBedroom = "daniel/house/bedroom/pi4";

std::vector<SensorSample> scenario_rows(const std::string& preset, std::int64_t ticks) {
  const auto spec = scenario_preset(preset);
  std::vector<SensorSample> out;
  for (std::int64_t t = 0; t < ticks; ++t) out.push_back(generate_tick(spec, t));
  return out;
}

// Keeps every put, duplicates included, so the dedup step has work to do.
class ListTable : public SampleTable {
 public:
  std::vector<SensorSample> rows;
  std::size_t removes = 0;

  PutResult put(const SensorSample& s) override {
    for (const auto& r : rows) {
      if (r.sample_id == s.sample_id) return PutResult::duplicate;
    }
    rows.push_back(s);
    return PutResult::stored;
  }
  DeleteResult remove(const std::string& id) override {
    ++removes;
    const auto before = rows.size();
    std::erase_if(rows, [&](const SensorSample& r) { return r.sample_id == id; });
    return rows.size() < before ? DeleteResult::removed : DeleteResult::absent;
  }
  ScanPage scan(const std::optional<std::string>&, std::size_t) const override {
    ScanPage p;
    p.rows = rows;
    return p;
  }
  std::size_t size() const override { return rows.size(); }
};

struct PipelineRig {
  TempDir dir;
  Warehouse wh{dir / "wh.dat"};
  ModelRegistry reg{dir / "registry"};
  std::int64_t now = 1648771200;

  RunResult run(TrainingPipeline& p, const std::string& id) {
    ExecutorOptions opt;
    opt.log_dir = dir / "logs";
    return execute_run(TrainingPipeline::default_dag(), id, p.tasks(), opt);
  }
};

TrainingOptions fast_options() {
  TrainingOptions o;
  o.seed = 3;
  o.kmeans.n_init = 4;
  return o;
}

}  // namespace

TEST(TrainingPipeline, EmptyWarehouseFailsWithNoData) {
  PipelineRig rig;
  TrainingPipeline p(rig.wh, rig.reg, fast_options(), [&] { return rig.now; });
  const auto r = rig.run(p, "retrain-000001");
  EXPECT_EQ(r.state, RunState::failed);
  EXPECT_EQ(r.failed_task, "scan");
  EXPECT_EQ(r.error, "scan: no data");
  EXPECT_EQ(r.tasks.at("scan").attempts, 1);
  for (const auto& t : {"clean", "train", "publish", "deploy"}) EXPECT_EQ(r.tasks.at(t).state, TaskState::skipped);
  EXPECT_EQ(rig.reg.max_version(), 0);
  EXPECT_FALSE(p.version());
}

TEST(TrainingPipeline, TenThousandSamplesEndToEnd) {
  PipelineRig rig;
  for (const auto& s : scenario_rows("garage", 5000)) rig.wh.put(s);
  for (const auto& s : scenario_rows("bedroom", 5000)) rig.wh.put(s);
  auto opts = fast_options();
  opts.page_budget = 64 * 1024;  // several pages
  std::vector<std::int64_t> deployed;
  TrainingPipeline p(rig.wh, rig.reg, opts, [&] { return rig.now; },
                     [&](const ModelArtifact& a) { deployed.push_back(a.version); });
  const auto r = rig.run(p, "retrain-000001");
  ASSERT_EQ(r.state, RunState::success) << r.error;
  EXPECT_EQ(p.scanned().size(), 10000u);
  EXPECT_GT(p.scan_pages(), 5u);
  ASSERT_EQ(p.version(), 1);

  const auto a = rig.reg.load(1);
  EXPECT_EQ(a.feature_schema, sensor_feature_names());
  ASSERT_EQ(a.detectors.size(), 2u);
  std::size_t train_rows = 0;
  for (const auto& station : {kGarage, kBedroom}) {
    const auto& st = p.stations().at(station);
    const auto& det = a.detectors.at(station);
    EXPECT_EQ(st.split.train.size(), 3500u);
    EXPECT_EQ(det.training_rows, 3500u);
    EXPECT_EQ(det.training_flagged, contamination_count(3500, 0.05));  // 175
    train_rows += det.training_rows;
    ASSERT_TRUE(a.reports.count(station));
    EXPECT_EQ(a.reports.at(station).clusters.size(), 4u);
    std::size_t clustered = 0;
    for (const auto& c : a.reports.at(station).clusters) clustered += c.count;
    EXPECT_EQ(clustered + a.reports.at(station).normal.count, 5000u);
    EXPECT_EQ(a.clusterers.at(station).k, 4u);
  }
  EXPECT_EQ(a.training_rows, train_rows);
  EXPECT_EQ(a.metrics["test_rows"], 3000);
  EXPECT_TRUE(a.metrics["stable"].get<bool>());
  const double rate = a.metrics["test_flag_rate"];
  EXPECT_NEAR(rate, 0.05, 0.02);
  ASSERT_TRUE(p.approval());
  EXPECT_TRUE(p.approval()->approved);
  EXPECT_TRUE(a.approved);
  EXPECT_EQ(deployed, (std::vector<std::int64_t>{1}));

  // The second run publishes the next version.
  TrainingPipeline again(rig.wh, rig.reg, opts, [&] { return rig.now + 300; });
  ASSERT_EQ(rig.run(again, "retrain-000002").state, RunState::success);
  EXPECT_EQ(again.version(), 2);
  EXPECT_EQ(rig.reg.max_version(), 2);
}

TEST(TrainingPipeline, DedupRewritesTheTable) {
  TempDir dir;
  ListTable table;
  auto rows = scenario_rows("garage", 200);
  for (const auto& r : rows) table.rows.push_back(r);
  SensorSample dup = rows[5];
  dup.readings[0] = 99.0;  // a later, different copy of the same id
  table.rows.push_back(dup);
  table.rows.push_back(rows[7]);
  ModelRegistry reg(dir / "reg");
  TrainingPipeline p(table, reg, fast_options(), [] { return std::int64_t{0}; });
  const auto r = execute_run(TrainingPipeline::default_dag(), "r", p.tasks());
  ASSERT_EQ(r.state, RunState::success) << r.error;
  EXPECT_EQ(p.cleaned().stats.duplicates, 2u);
  EXPECT_EQ(table.removes, 2u);
  ASSERT_EQ(table.rows.size(), 200u);
  std::set<std::string> ids;
  for (const auto& row : table.rows) ids.insert(row.sample_id);
  EXPECT_EQ(ids.size(), 200u);
  for (const auto& row : table.rows) {
    if (row.sample_id == rows[5].sample_id) {
      EXPECT_EQ(row, rows[5]);
    }
  }
}

TEST(TrainingPipeline, SmallStationIsSkippedAndRejectionLeavesUnapproved) {
  PipelineRig rig;
  for (const auto& s : scenario_rows("garage", 400)) rig.wh.put(s);
  for (const auto& s : scenario_rows("bedroom", 5)) rig.wh.put(s);
  auto opts = fast_options();
  opts.approval.contamination = 0.4;  // far from any plausible flag rate
  opts.approval.band = 0.01;
  bool deployed = false;
  TrainingPipeline p(rig.wh, rig.reg, opts, [&] { return rig.now; }, [&](const ModelArtifact&) { deployed = true; });
  const auto r = rig.run(p, "r1");
  ASSERT_EQ(r.state, RunState::success) << r.error;
  const auto a = rig.reg.load(1);
  EXPECT_EQ(a.detectors.size(), 1u);
  EXPECT_TRUE(a.detectors.count(kGarage));
  EXPECT_FALSE(a.approved);
  EXPECT_FALSE(p.approval()->approved);
  EXPECT_FALSE(deployed);
  EXPECT_EQ(r.tasks.at("deploy").state, TaskState::success);  // ran, nothing to ship
}

TEST(TrainingPipeline, ZScoreFlagChangesOnlyClustering) {
  PipelineRig rig;
  for (const auto& s : scenario_rows("bedroom", 3000)) rig.wh.put(s);
  auto run_with = [&](bool z) {
    auto opts = fast_options();
    opts.zscore_kmeans = z;
    TrainingPipeline p(rig.wh, rig.reg, opts, [&] { return rig.now; });
    EXPECT_EQ(rig.run(p, z ? "z" : "raw").state, RunState::success);
    return rig.reg.load(*p.version());
  };
  const auto raw = run_with(false);
  const auto z = run_with(true);
  EXPECT_EQ(raw.detectors.at(kBedroom).to_json(), z.detectors.at(kBedroom).to_json());
  EXPECT_FALSE(raw.metrics["zscore_kmeans"].get<bool>());
  EXPECT_TRUE(z.metrics["zscore_kmeans"].get<bool>());
  // Report means stay in sensor units either way.
  const auto lux = static_cast<std::size_t>(SensorField::lux);
  EXPECT_NEAR(z.reports.at(kBedroom).normal.mean[lux], raw.reports.at(kBedroom).normal.mean[lux], 1e-9);
}

TEST(TrainingOptions, FromConfig) {
  const auto o = training_options_from_config(KvConfig::parse_string(
      "contamination = 0.1\nkmeans.k = 3\niforest.n_trees = 50\nsplit_ratio = 0.8\nseed = 9\nzscore_kmeans = true\n"
      "approval.band = 0.03\nstation.garage = a/b/c/d\n"));
  EXPECT_EQ(o.iforest.contamination, 0.1);
  EXPECT_EQ(o.approval.contamination, 0.1);
  EXPECT_EQ(o.approval.band, 0.03);
  EXPECT_EQ(o.kmeans.k, 3u);
  EXPECT_EQ(o.iforest.n_trees, 50u);
  EXPECT_EQ(o.split_ratio, 0.8);
  EXPECT_EQ(o.seed, 9u);
  EXPECT_TRUE(o.zscore_kmeans);
  EXPECT_EQ(o.codes.garage, "a/b/c/d");
}

// --- deployer -------------------------------------------------------------

namespace {

ModelArtifact two_station_artifact(std::int64_t version, bool approved) {
  ModelArtifact a;
  a.version = version;
  a.approved = approved;
  a.feature_schema = sensor_feature_names();
  IsolationForestParams p;
  p.n_trees = 20;
  for (const auto& [preset, station] : {std::pair{"garage", kGarage}, std::pair{"bedroom", kBedroom}}) {
    Matrix x;
    for (const auto& s : scenario_rows(preset, 300)) x.append_row(sample_feature_vector(s));
    a.detectors[station] = iforest_fit(x, a.feature_schema, p).model;
  }
  return a;
}

struct DeployRig {
  TempDir dir;
  KeyRing keys;
  std::unique_ptr<InProcessBus> bus;
  std::int64_t now_ms = 0;
  std::unique_ptr<EdgeAgent> garage;
  std::unique_ptr<EdgeAgent> bedroom;
  std::unique_ptr<Deployer> deployer;

  DeployRig() {
    for (const auto& id : {kGarage, kBedroom, std::string("orchestrator")}) keys.add(id, KeyRing::derive_key(8, id));
    bus = std::make_unique<InProcessBus>(keys);
    bus->set_clock([this] { return now_ms; });
    garage = make_agent(kGarage);
    bedroom = make_agent(kBedroom);
    DeployOptions o;
    o.key = KeyRing::derive_key(8, "orchestrator");
    o.stations = {kGarage, kBedroom};
    o.retry_interval_ms = 1000;
    deployer = std::make_unique<Deployer>(*bus, o, [this] { return now_ms; });
  }
  std::unique_ptr<EdgeAgent> make_agent(const std::string& station) {
    AgentConfig c;
    c.station = station;
    c.key = KeyRing::derive_key(8, station);
    c.cache_dir = dir / station;
    return std::make_unique<EdgeAgent>(c, *bus, [this] { return now_ms / 1000; });
  }
  void poll_agents() {
    garage->poll_control();
    bedroom->poll_control();
  }
};

}  // namespace

TEST(Deployer, UnapprovedIsRejectedBeforePublish) {
  DeployRig rig;
  EXPECT_THROW(rig.deployer->deploy(two_station_artifact(1, false)), std::invalid_argument);
  EXPECT_EQ(rig.bus->stats().published, 0u);
  EXPECT_TRUE(rig.deployer->states().empty());
}

TEST(Deployer, TwoStationsOnlineGiveTwoReceipts) {
  DeployRig rig;
  rig.deployer->deploy(two_station_artifact(1, true));
  rig.poll_agents();
  EXPECT_EQ(rig.deployer->pump(), 2u);
  EXPECT_TRUE(rig.deployer->complete());
  const auto receipts = rig.deployer->receipts();
  ASSERT_EQ(receipts.size(), 2u);
  for (const auto& [station, r] : receipts) {
    EXPECT_TRUE(r.accepted) << r.reason;
    EXPECT_EQ(r.active_version, 1);
  }
  EXPECT_EQ(rig.garage->active_version(), 1);
  EXPECT_EQ(rig.bedroom->active_version(), 1);
}

TEST(Deployer, PartitionedStationGetsModelAfterHeal) {
  DeployRig rig;
  rig.bus->inject_fault({FaultSpec::Kind::partition, kBedroom, 0, 0});
  rig.deployer->deploy(two_station_artifact(1, true));
  rig.poll_agents();
  EXPECT_EQ(rig.deployer->pump(), 1u);
  EXPECT_FALSE(rig.deployer->complete());
  EXPECT_EQ(rig.bedroom->active_version(), 0);

  rig.now_ms += 1500;  // still partitioned: the retry is lost too
  EXPECT_EQ(rig.deployer->retry_due(), 1u);
  rig.poll_agents();
  EXPECT_EQ(rig.deployer->pump(), 0u);

  rig.bus->heal(kBedroom);
  EXPECT_EQ(rig.deployer->retry_due(), 0u);  // interval not elapsed yet
  rig.now_ms += 1000;
  EXPECT_EQ(rig.deployer->retry_due(), 1u);
  rig.poll_agents();
  EXPECT_EQ(rig.deployer->pump(), 1u);
  EXPECT_TRUE(rig.deployer->complete());
  EXPECT_EQ(rig.bedroom->active_version(), 1);
  for (const auto& st : rig.deployer->states()) {
    EXPECT_EQ(st.attempts, st.station == kBedroom ? 3 : 1);
  }
}

TEST(Deployer, NewerVersionSupersedesAndStaleReceiptsAreIgnored) {
  DeployRig rig;
  rig.deployer->deploy(two_station_artifact(1, true));
  rig.deployer->deploy(two_station_artifact(2, true));
  rig.poll_agents();  // agents see v1 then v2
  rig.deployer->pump();
  EXPECT_TRUE(rig.deployer->complete());
  for (const auto& [station, r] : rig.deployer->receipts()) EXPECT_EQ(r.version, 2);
  EXPECT_EQ(rig.garage->active_version(), 2);
  EXPECT_EQ(rig.deployer->current_version(), 2);
}

// Active versions never exceed the newest approved version the deployer was given.
TEST(Deployer, AgentNeverRunsUnapprovedVersion) {
  DeployRig rig;
  rig.deployer->deploy(two_station_artifact(1, true));
  // A forged deploy of an unapproved v2 straight onto the bus.
  Envelope env;
  env.message_id = "orchestrator/forged";
  env.topic = model_topic(kGarage);
  env.sender = "orchestrator";
  env.payload_kind = PayloadKind::model_deploy;
  env.payload = two_station_artifact(2, false).to_json().dump();
  sign(env, KeyRing::derive_key(8, "orchestrator"));
  rig.bus->publish(env);
  rig.poll_agents();
  EXPECT_EQ(rig.garage->active_version(), 1);
}

// --- alerts ---------------------------------------------------------------

namespace {

struct AlertRig {
  TempDir dir;
  KeyRing keys;
  std::unique_ptr<InProcessBus> bus;
  std::int64_t now = 1648771300;

  AlertRig() {
    keys.add(kGarage, KeyRing::derive_key(4, kGarage));
    bus = std::make_unique<InProcessBus>(keys);
  }
  AlertOptions options() const {
    AlertOptions o;
    o.sink = dir / "alerts.ndjson";
    o.dead_letter = dir / "alerts.dead.ndjson";
    o.backoff = std::chrono::milliseconds(1);
    return o;
  }
  std::unique_ptr<AlertDispatcher> dispatcher(AlertOptions o) {
    return std::make_unique<AlertDispatcher>(*bus, o, [this] { return now; });
  }
  Envelope report_envelope(const std::string& id, const SensorSample& s) const {
    AnomalyReport r;
    r.station = kGarage;
    r.sample = s;
    r.score = 0.71;
    r.model_version = 3;
    r.detected_at = 1648771250;
    Envelope env;
    env.message_id = id;
    env.topic = anomaly_topic(kGarage);
    env.sender = kGarage;
    env.payload_kind = PayloadKind::anomaly_report;
    env.payload = r.to_json().dump();
    sign(env, KeyRing::derive_key(4, kGarage));
    return env;
  }
};

SensorSample door_open_sample() {
  const auto spec = scenario_preset("garage");
  SensorSample s = generate_tick(spec, 42);
  s.at(SensorField::lux) = 900.0;
  return s;
}

}  // namespace

TEST(Alerts, ReportBecomesOneRecordWithTheFullSample) {
  AlertRig rig;
  auto d = rig.dispatcher(rig.options());
  const auto sample = door_open_sample();
  ASSERT_EQ(rig.bus->publish(rig.report_envelope("g/anomaly/1", sample)), PublishStatus::ack);
  EXPECT_EQ(d->pump(), 1u);
  const auto recs = read_alert_file(rig.dir / "alerts.ndjson");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].alert_id, "g/anomaly/1");
  EXPECT_EQ(recs[0].station, kGarage);
  EXPECT_EQ(recs[0].sample, sample);
  EXPECT_EQ(recs[0].model_version, 3);
  EXPECT_EQ(recs[0].score, 0.71);
  EXPECT_EQ(recs[0].emitted_at, rig.now);
  EXPECT_EQ(recs[0].sink_status, "written");
  EXPECT_FALSE(std::filesystem::exists(rig.dir / "alerts.dead.ndjson"));
}

TEST(Alerts, RedeliveryIsDeduplicatedAcrossRestarts) {
  AlertRig rig;
  const auto env = rig.report_envelope("g/anomaly/7", door_open_sample());
  {
    auto d = rig.dispatcher(rig.options());
    EXPECT_TRUE(d->dispatch(env));
    EXPECT_FALSE(d->dispatch(env));
    EXPECT_EQ(d->stats().duplicates, 1u);
  }
  auto d = rig.dispatcher(rig.options());
  EXPECT_FALSE(d->dispatch(env));
  EXPECT_EQ(read_alert_file(rig.dir / "alerts.ndjson").size(), 1u);
}

TEST(Alerts, InvalidEnvelopesAreIgnored) {
  AlertRig rig;
  auto d = rig.dispatcher(rig.options());
  auto env = rig.report_envelope("x", door_open_sample());
  env.payload_kind = PayloadKind::ack;
  EXPECT_FALSE(d->dispatch(env));
  env = rig.report_envelope("y", door_open_sample());
  env.payload = "{}";
  EXPECT_FALSE(d->dispatch(env));
  EXPECT_EQ(d->stats().invalid, 2u);
  EXPECT_FALSE(std::filesystem::exists(rig.dir / "alerts.ndjson"));
}

TEST(Alerts, WebhookDownGoesToDeadLetterAfterRetries) {
  AlertRig rig;
  auto o = rig.options();
  o.webhook_url = "http://127.0.0.1:9/hook";
  o.max_attempts = 3;
  auto d = rig.dispatcher(o);
  int calls = 0;
  d->set_poster([&](const std::string&, const std::string&) {
    ++calls;
    return false;
  });
  const auto rec = d->dispatch(rig.report_envelope("g/anomaly/2", door_open_sample()));
  ASSERT_TRUE(rec);
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(rec->sink_status, "webhook_failed");
  const auto dead = read_alert_file(rig.dir / "alerts.dead.ndjson");
  ASSERT_EQ(dead.size(), 1u);
  EXPECT_EQ(dead[0].alert_id, "g/anomaly/2");
  EXPECT_EQ(read_alert_file(rig.dir / "alerts.ndjson").size(), 1u);
  EXPECT_EQ(d->stats().dead_lettered, 1u);
}

TEST(Alerts, SinkFailureGoesToDeadLetter) {
  AlertRig rig;
  auto o = rig.options();
  std::ofstream(rig.dir / "not-a-dir") << "x";
  o.sink = rig.dir / "not-a-dir" / "alerts.ndjson";
  auto d = rig.dispatcher(o);
  const auto rec = d->dispatch(rig.report_envelope("g/anomaly/3", door_open_sample()));
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->sink_status, "sink_failed");
  const auto dead = read_alert_file(rig.dir / "alerts.dead.ndjson");
  ASSERT_EQ(dead.size(), 1u);
  EXPECT_EQ(dead[0].sink_status, "sink_failed");
  EXPECT_EQ(d->stats().sink_failures, 1u);
}

TEST(Alerts, WebhookReceivesTheRecordOverHttp) {
  AlertRig rig;
  httplib::Server server;
  std::mutex mu;
  std::vector<std::string> bodies;
  server.Post("/hook", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard l(mu);
    bodies.push_back(req.body);
    res.status = 204;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  auto o = rig.options();
  o.webhook_url = "http://127.0.0.1:" + std::to_string(port) + "/hook";
  auto d = rig.dispatcher(o);
  const auto rec = d->dispatch(rig.report_envelope("g/anomaly/4", door_open_sample()));
  server.stop();
  th.join();
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->sink_status, "webhook_ok");
  ASSERT_EQ(bodies.size(), 1u);
  const auto posted = AlertRecord::from_json(nlohmann::json::parse(bodies[0]));
  EXPECT_EQ(posted.alert_id, "g/anomaly/4");
  EXPECT_EQ(posted.sample, door_open_sample());
}

// Every anomaly verdict yields exactly one record even when acks are lost
// and reports are re-sent.
TEST(Alerts, EveryVerdictYieldsExactlyOneRecordUnderLostAcks) {
  AlertRig rig;
  rig.keys.add("orchestrator", KeyRing::derive_key(4, "orchestrator"));
  rig.bus = std::make_unique<InProcessBus>(rig.keys);
  auto d = rig.dispatcher(rig.options());
  AgentConfig c;
  c.station = kGarage;
  c.key = KeyRing::derive_key(4, kGarage);
  c.cache_dir = rig.dir / "agent";
  EdgeAgent agent(c, *rig.bus, [&] { return rig.now; });
  auto model = two_station_artifact(1, true);
  agent.activate_model(model);

  std::size_t verdicts = 0;
  for (int i = 0; i < 12; ++i) {
    SensorSample s = generate_tick(scenario_preset("garage"), 1000 + i);
    for (std::size_t f = 0; f < kNumSensorFields; ++f) {
      s.readings[f] = sensor_field_range(static_cast<SensorField>(f)).hi - 0.001 * i;  // far corner
    }
    if (i % 3 == 0) rig.bus->inject_fault({FaultSpec::Kind::drop_ack_next_n, kGarage, 1, 0});
    if (agent.score_local(s) == -1) ++verdicts;
    agent.flush_reports();
    agent.flush_reports();
    d->pump();
  }
  while (agent.outbox_size() > 0) agent.flush_reports();
  d->pump();
  EXPECT_EQ(verdicts, 12u);
  EXPECT_EQ(read_alert_file(rig.dir / "alerts.ndjson").size(), verdicts);
  EXPECT_GT(d->stats().duplicates, 0u);
}

TEST(TrainingOptions, ShippedConfigMatchesDefaults) {
  const auto o = training_options_from_config(
      KvConfig::load(std::filesystem::path(EDGEPIPE_SOURCE_DIR) / "config" / "pipeline.conf"));
  const TrainingOptions d;
  EXPECT_EQ(o.iforest.contamination, d.iforest.contamination);
  EXPECT_EQ(o.iforest.n_trees, d.iforest.n_trees);
  EXPECT_EQ(o.iforest.subsample, d.iforest.subsample);
  EXPECT_EQ(o.kmeans.k, d.kmeans.k);
  EXPECT_EQ(o.kmeans.n_init, d.kmeans.n_init);
  EXPECT_EQ(o.kmeans.max_iter, d.kmeans.max_iter);
  EXPECT_EQ(o.split_ratio, d.split_ratio);
  EXPECT_EQ(o.page_budget, d.page_budget);
  EXPECT_EQ(o.min_station_rows, d.min_station_rows);
  EXPECT_EQ(o.codes.garage, d.codes.garage);
  EXPECT_EQ(o.approval.band, d.approval.band);
  EXPECT_TRUE(o.auto_approve);
}
