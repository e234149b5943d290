#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edgepipe/bus/bus.hpp"
#include "edgepipe/edge/agent.hpp"
#include "edgepipe/orchestrator/alerts.hpp"
#include "edgepipe/orchestrator/deployer.hpp"
#include "edgepipe/orchestrator/scheduler.hpp"
#include "edgepipe/orchestrator/training.hpp"
#include "edgepipe/sensor/scenario.hpp"
#include "edgepipe/warehouse/ingest_gateway.hpp"

namespace edgepipe {

// A bus fault switched on at `at_tick`. Partitions and delays are lifted
// after duration_ticks (0 keeps a delay until finish()); drop counts expire
// on their own.
struct ScriptedFault {
  std::int64_t at_tick = 0;
  std::int64_t duration_ticks = 0;
  FaultSpec fault;
};

struct SimulationConfig {
  std::filesystem::path work_dir;
  std::vector<ScenarioSpec> scenarios;  // one agent per scenario
  // 0 keeps each scenario's own seed; otherwise seeds are derived from it.
  std::uint64_t seed = 0;
  std::uint64_t key_secret = 1;
  std::int64_t flush_period_s = 10;
  std::vector<ScriptedFault> faults;
  bool pipeline = true;
  std::int64_t scheduler_start_tick = 0;  // first tick the scheduler is consulted
  DagSpec dag = TrainingPipeline::default_dag();
  TrainingOptions training;
  std::int64_t deploy_retry_ms = 5000;
  std::string webhook_url;
  bool resume = true;  // continue ticks from <work_dir>/sim_state.json
};

struct SimRunRecord {
  std::string run_id;
  std::int64_t tick = 0;
  RunState state = RunState::success;
  std::string error;
  std::optional<std::int64_t> version;
  bool approved = false;
};

struct SimulationSummary {
  std::int64_t first_tick = 0;
  std::int64_t next_tick = 0;
  std::map<std::string, std::uint64_t> generated;  // by station
  std::map<std::string, std::uint64_t> anomalies;  // verdicts by station
  std::map<std::string, std::int64_t> active_versions;
  std::map<std::string, std::size_t> pending;      // cache entries not yet acked
  std::size_t warehouse_rows = 0;
  std::vector<SimRunRecord> runs;
  std::uint64_t alerts_written = 0;
  BusStats bus;
  GatewayStats gateway;
  AlertStats alerts;

  nlohmann::ordered_json to_json() const;
};

// Composition root: agents, in-process bus, ingest gateway, warehouse,
// scheduler plus training pipeline, deployer and alert dispatcher, driven in
// lockstep on a virtual clock (one tick = one tick_period of sim time), so a
// run is a pure function of its config. Files under work_dir:
//   warehouse.dat, registry/, runs.ndjson, logs/, agents/<n>/,
//   alerts.ndjson, alerts.dead.ndjson, sim_state.json
class Simulation {
 public:
  explicit Simulation(SimulationConfig config);
  ~Simulation();

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void step();
  void run_ticks(std::int64_t n);
  // Heals every fault and keeps flushing until all caches and outboxes are
  // empty and every deployment has its receipts (or max_rounds pass).
  // Returns true when fully drained. Persists sim_state.json.
  bool finish(int max_rounds = 200);

  // Adds a scripted episode to a station's scenario from now on.
  void add_episode(const std::string& station, const Episode& episode);

  std::int64_t tick() const { return tick_; }
  std::int64_t now() const;  // sim epoch seconds
  SimulationSummary summary() const;

  Warehouse& warehouse() { return *warehouse_; }
  ModelRegistry& registry() { return *registry_; }
  InProcessBus& bus() { return *bus_; }
  EdgeAgent& agent(const std::string& station);
  AlertDispatcher& dispatcher() { return *dispatcher_; }
  Deployer& deployer() { return *deployer_; }
  // State of the most recent pipeline run.
  const TrainingPipeline& pipeline() const { return *pipeline_; }
  const std::vector<ScenarioSpec>& scenarios() const { return specs_; }
  const SimulationConfig& config() const { return config_; }

 private:
  void service_round();
  void maybe_run_pipeline();
  void save_state() const;

  SimulationConfig config_;
  std::vector<ScenarioSpec> specs_;
  std::int64_t epoch_ = 0;
  std::int64_t tick_period_ = 1;
  std::int64_t tick_ = 0;
  std::int64_t first_tick_ = 0;
  std::int64_t extra_ms_ = 0;  // clock advance used by finish() to release delays

  std::unique_ptr<InProcessBus> bus_;
  std::unique_ptr<Warehouse> warehouse_;
  std::unique_ptr<IngestGateway> gateway_;
  std::unique_ptr<ModelRegistry> registry_;
  std::unique_ptr<RunLedger> ledger_;
  std::unique_ptr<Scheduler> scheduler_;
  std::unique_ptr<Deployer> deployer_;
  std::unique_ptr<AlertDispatcher> dispatcher_;
  std::unique_ptr<TrainingPipeline> pipeline_;
  std::map<std::string, std::unique_ptr<EdgeAgent>> agents_;
  std::map<std::string, std::uint64_t> generated_;
  std::map<std::string, std::uint64_t> anomalies_;
  std::vector<SimRunRecord> runs_;
  std::vector<std::pair<std::int64_t, FaultSpec>> lifts_;  // (tick, fault to undo)
};

// "garage", "bedroom", or a scenario config path.
ScenarioSpec resolve_scenario(const std::string& name_or_path);

// Directory-safe name for a station path.
std::string station_dir_name(const std::string& station);

}  // namespace edgepipe
