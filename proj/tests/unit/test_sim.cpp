#include <gtest/gtest.h>

#include <set>

#include "edgepipe/orchestrator/alerts.hpp"
#include "edgepipe/sim/simulation.hpp"
#include "support/temp_dir.hpp"

using namespace edgepipe;
using test_support::TempDir;

namespace {

const std::string kGarage = "daniel/house/garage/pi3";
const std::string kBedroom = "daniel/house/bedroom/pi4";

std::set<std::string> warehouse_ids(const Warehouse& wh) {
  std::set<std::string> ids;
  for (const auto& s : wh.scan_all()) ids.insert(s.sample_id);
  return ids;
}

ScriptedFault fault(std::int64_t at, std::int64_t duration, FaultSpec::Kind kind, const std::string& target, int n = 0,
                    std::int64_t delay_ms = 0) {
  ScriptedFault f;
  f.at_tick = at;
  f.duration_ticks = duration;
  f.fault.kind = kind;
  f.fault.target = target;
  f.fault.n = n;
  f.fault.delay_ms = delay_ms;
  return f;
}

SimulationConfig two_stations(const TempDir& dir) {
  SimulationConfig cfg;
  cfg.work_dir = dir.path();
  cfg.scenarios = {scenario_preset("garage"), scenario_preset("bedroom")};
  return cfg;
}

}  // namespace

TEST(Simulation, NoLossThroughPartitionAndLostAcks) {
  TempDir dir;
  auto cfg = two_stations(dir);
  cfg.pipeline = false;
  cfg.faults = {fault(200, 60, FaultSpec::Kind::partition, kGarage),
                fault(200, 60, FaultSpec::Kind::partition, kBedroom),
                fault(300, 0, FaultSpec::Kind::drop_ack_next_n, "", 5),
                fault(400, 0, FaultSpec::Kind::drop_next_n, kBedroom, 3),
                fault(450, 0, FaultSpec::Kind::delay, kGarage, 0, 15000)};
  Simulation sim(cfg);
  sim.run_ticks(600);
  ASSERT_TRUE(sim.finish());

  const auto s = sim.summary();
  EXPECT_EQ(s.generated.at(kGarage), 600u);
  EXPECT_EQ(s.generated.at(kBedroom), 600u);
  const auto ids = warehouse_ids(sim.warehouse());
  EXPECT_EQ(ids.size(), 1200u);
  EXPECT_EQ(s.warehouse_rows, 1200u);
  for (const auto& spec : sim.scenarios()) {
    for (std::int64_t t = 0; t < 600; ++t) EXPECT_TRUE(ids.count(generate_tick(spec, t).sample_id)) << spec.station << " " << t;
  }
  EXPECT_GT(s.gateway.duplicates, 0u);
  EXPECT_GT(s.bus.dropped_by_fault, 0u);
  EXPECT_EQ(s.pending.at(kGarage), 0u);
}

TEST(Simulation, DeterministicUnderSeed) {
  auto run = [](std::uint64_t seed) {
    TempDir dir;
    auto cfg = two_stations(dir);
    cfg.pipeline = false;
    cfg.seed = seed;
    Simulation sim(cfg);
    sim.run_ticks(50);
    sim.finish();
    std::vector<SensorSample> rows = sim.warehouse().scan_all();
    std::vector<std::string> lines;
    for (const auto& r : rows) lines.push_back(sample_to_csv_line(r));
    std::sort(lines.begin(), lines.end());
    return lines;
  };
  EXPECT_EQ(run(5), run(5));
  EXPECT_NE(run(5), run(6));
}

TEST(Simulation, ResumesTicksFromState) {
  TempDir dir;
  auto cfg = two_stations(dir);
  cfg.pipeline = false;
  {
    Simulation sim(cfg);
    sim.run_ticks(30);
    sim.finish();
  }
  Simulation again(cfg);
  EXPECT_EQ(again.tick(), 30);
  again.run_ticks(20);
  again.finish();
  EXPECT_EQ(again.summary().warehouse_rows, 100u);
}

TEST(Simulation, FullLoopTrainsDeploysAndAlerts) {
  TempDir dir;
  auto cfg = two_stations(dir);
  cfg.scheduler_start_tick = 1500;
  cfg.dag.schedule_interval_s = 3600;
  Simulation sim(cfg);
  sim.run_ticks(1501);

  const auto s0 = sim.summary();
  ASSERT_EQ(s0.runs.size(), 1u);
  EXPECT_EQ(s0.runs[0].state, RunState::success) << s0.runs[0].error;
  ASSERT_TRUE(s0.runs[0].approved);
  EXPECT_EQ(s0.runs[0].version, 1);

  // k=4 clusters of flagged bedroom rows: the working episode shows up as
  // a brighter, warmer group than normal.
  const auto& bedroom = sim.pipeline().stations().at(kBedroom);
  ASSERT_TRUE(bedroom.report);
  const auto& rep = *bedroom.report;
  const auto col = [&](const std::string& f) {
    return static_cast<std::size_t>(std::find(rep.features.begin(), rep.features.end(), f) - rep.features.begin());
  };
  const auto lux = col("lux"), temp = col("temperature");
  ASSERT_LT(lux, rep.features.size());
  EXPECT_EQ(rep.clusters.size(), 4u);
  bool hot_bright = false;
  for (const auto& c : rep.clusters) {
    if (c.count > 0 && c.mean[lux] > rep.normal.mean[lux] && c.mean[temp] > rep.normal.mean[temp]) hot_bright = true;
  }
  EXPECT_TRUE(hot_bright);

  // Door opens while the bedroom is in its working episode (1620..1709).
  Episode door;
  door.id = "door_open";
  door.start = 1650;
  door.duration = 20;
  door.offsets[static_cast<std::size_t>(SensorField::lux)] = 1800;
  door.offsets[static_cast<std::size_t>(SensorField::temperature)] = 4.5;
  door.offsets[static_cast<std::size_t>(SensorField::humidity)] = 9.0;
  door.offsets[static_cast<std::size_t>(SensorField::color_r)] = 2200;
  door.offsets[static_cast<std::size_t>(SensorField::color_g)] = 2400;
  door.offsets[static_cast<std::size_t>(SensorField::color_b)] = 2000;
  door.offsets[static_cast<std::size_t>(SensorField::color_temp)] = 2600;
  sim.add_episode(kBedroom, door);
  sim.run_ticks(1720 - sim.tick());
  ASSERT_TRUE(sim.finish());

  const auto s = sim.summary();
  EXPECT_EQ(s.active_versions.at(kBedroom), 1);
  EXPECT_EQ(s.active_versions.at(kGarage), 1);
  const auto alerts = read_alert_file(dir / "alerts.ndjson");
  ASSERT_FALSE(alerts.empty());
  const ScenarioSpec* spec = nullptr;
  for (const auto& sc : sim.scenarios()) {
    if (sc.station == kBedroom) spec = &sc;
  }
  std::size_t door_alerts = 0;
  for (const auto& a : alerts) {
    if (a.station != kBedroom) continue;
    const auto tick = std::stoll(a.sample.sample_id.substr(a.sample.sample_id.rfind('/') + 1));
    if (tick < 1650 || tick >= 1670) continue;
    ++door_alerts;
    const auto expect = generate_tick(*spec, tick);
    EXPECT_EQ(a.sample.readings, expect.readings);
    EXPECT_EQ(a.model_version, 1);
  }
  EXPECT_GE(door_alerts, 1u);
  std::set<std::string> ids;
  for (const auto& a : alerts) EXPECT_TRUE(ids.insert(a.alert_id).second);
}
