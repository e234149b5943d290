#include "edgepipe/sim/simulation.hpp"

#include <algorithm>
#include <fstream>

#include "edgepipe/common/binary_io.hpp"
#include "edgepipe/common/errors.hpp"

namespace edgepipe {

ScenarioSpec resolve_scenario(const std::string& name_or_path) {
  const auto presets = scenario_preset_names();
  if (std::find(presets.begin(), presets.end(), name_or_path) != presets.end()) return scenario_preset(name_or_path);
  if (!std::filesystem::exists(name_or_path)) {
    throw DataError("unknown scenario '" + name_or_path + "' (not a preset or a readable file)");
  }
  return load_scenario(name_or_path);
}

std::string station_dir_name(const std::string& station) {
  std::string out = station;
  std::replace(out.begin(), out.end(), '/', '_');
  return out;
}

nlohmann::ordered_json SimulationSummary::to_json() const {
  nlohmann::ordered_json j;
  j["first_tick"] = first_tick;
  j["next_tick"] = next_tick;
  j["generated"] = generated;
  j["anomalies"] = anomalies;
  j["active_versions"] = active_versions;
  j["pending"] = pending;
  j["warehouse_rows"] = warehouse_rows;
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : runs) {
    nlohmann::ordered_json o;
    o["run_id"] = r.run_id;
    o["tick"] = r.tick;
    o["state"] = run_state_name(r.state);
    o["error"] = r.error;
    o["version"] = r.version ? nlohmann::ordered_json(*r.version) : nlohmann::ordered_json(nullptr);
    o["approved"] = r.approved;
    j["runs"].push_back(o);
  }
  j["alerts_written"] = alerts_written;
  j["bus"] = {{"published", bus.published},
              {"delivered", bus.delivered},
              {"rejected_unknown_sender", bus.rejected_unknown_sender},
              {"rejected_bad_auth", bus.rejected_bad_auth},
              {"rejected_malformed", bus.rejected_malformed},
              {"dropped_by_fault", bus.dropped_by_fault}};
  j["gateway"] = {{"batches", gateway.batches},
                  {"stored", gateway.stored},
                  {"duplicates", gateway.duplicates},
                  {"malformed", gateway.malformed}};
  j["alerts"] = {{"received", alerts.received},
                 {"dispatched", alerts.dispatched},
                 {"duplicates", alerts.duplicates},
                 {"dead_lettered", alerts.dead_lettered}};
  return j;
}

Simulation::Simulation(SimulationConfig config) : config_(std::move(config)), specs_(config_.scenarios) {
  if (specs_.empty()) throw std::invalid_argument("simulation: no scenarios");
  epoch_ = specs_.front().epoch;
  tick_period_ = specs_.front().tick_period;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    auto& s = specs_[i];
    s.validate();
    if (s.epoch != epoch_ || s.tick_period != tick_period_) {
      throw DataError("simulation: scenarios must share epoch and tick_period");
    }
    if (config_.seed != 0) s.rng_seed = config_.seed * 1000003ULL + i;
    for (std::size_t j = 0; j < i; ++j) {
      if (specs_[j].station == s.station) throw DataError("simulation: station " + s.station + " listed twice");
    }
  }
  const auto& dir = config_.work_dir;
  std::filesystem::create_directories(dir);

  const auto state_path = dir / "sim_state.json";
  if (config_.resume && std::filesystem::exists(state_path)) {
    const auto j = nlohmann::json::parse(read_file(state_path), nullptr, false);
    if (j.is_discarded() || !j.contains("next_tick")) throw DataError("simulation: bad " + state_path.string());
    tick_ = j["next_tick"].get<std::int64_t>();
  }
  first_tick_ = tick_;

  KeyRing keys;
  for (const auto& s : specs_) keys.add(s.station, KeyRing::derive_key(config_.key_secret, s.station));
  keys.add("orchestrator", KeyRing::derive_key(config_.key_secret, "orchestrator"));
  bus_ = std::make_unique<InProcessBus>(keys);
  bus_->set_clock([this] { return now() * 1000 + extra_ms_; });

  warehouse_ = std::make_unique<Warehouse>(dir / "warehouse.dat");
  gateway_ = std::make_unique<IngestGateway>(*bus_, *warehouse_, [this] { return now(); });
  registry_ = std::make_unique<ModelRegistry>(dir / "registry");
  ledger_ = std::make_unique<RunLedger>(dir / "runs.ndjson");
  scheduler_ = std::make_unique<Scheduler>(config_.dag, *ledger_);

  DeployOptions dopt;
  dopt.key = KeyRing::derive_key(config_.key_secret, "orchestrator");
  for (const auto& s : specs_) dopt.stations.push_back(s.station);
  dopt.retry_interval_ms = config_.deploy_retry_ms;
  deployer_ = std::make_unique<Deployer>(*bus_, dopt, [this] { return now() * 1000 + extra_ms_; });

  AlertOptions aopt;
  aopt.sink = dir / "alerts.ndjson";
  aopt.dead_letter = dir / "alerts.dead.ndjson";
  aopt.webhook_url = config_.webhook_url;
  dispatcher_ = std::make_unique<AlertDispatcher>(*bus_, aopt, [this] { return now(); });

  pipeline_ = std::make_unique<TrainingPipeline>(
      *warehouse_, *registry_, config_.training, [this] { return now(); },
      [this](const ModelArtifact& a) { deployer_->deploy(a); });

  for (const auto& s : specs_) {
    AgentConfig ac;
    ac.station = s.station;
    ac.key = KeyRing::derive_key(config_.key_secret, s.station);
    ac.cache_dir = dir / "agents" / station_dir_name(s.station);
    ac.tick_period_s = tick_period_;
    ac.flush_period_s = config_.flush_period_s;
    agents_.emplace(s.station, std::make_unique<EdgeAgent>(ac, *bus_, [this] { return now(); }));
    generated_[s.station] = 0;
    anomalies_[s.station] = 0;
  }

  // A resumed or restarted simulation ships the newest approved model.
  if (auto v = registry_->latest_approved()) deployer_->deploy(registry_->load(*v));
}

Simulation::~Simulation() = default;

std::int64_t Simulation::now() const { return epoch_ + tick_ * tick_period_; }

EdgeAgent& Simulation::agent(const std::string& station) {
  auto it = agents_.find(station);
  if (it == agents_.end()) throw std::out_of_range("simulation: no station " + station);
  return *it->second;
}

void Simulation::add_episode(const std::string& station, const Episode& episode) {
  for (auto& s : specs_) {
    if (s.station == station) {
      s.episodes.push_back(episode);
      return;
    }
  }
  throw std::out_of_range("simulation: no station " + station);
}

void Simulation::service_round() {
  bus_->release_due();
  gateway_->pump();
  dispatcher_->pump();
  deployer_->pump();
  deployer_->retry_due();
}

void Simulation::maybe_run_pipeline() {
  if (!config_.pipeline || tick_ < config_.scheduler_start_tick) return;
  for (const auto& run_id : scheduler_->schedule(now())) {
    ExecutorOptions opt;
    opt.ledger = ledger_.get();
    opt.log_dir = config_.work_dir / "logs";
    opt.clock = [this] { return now(); };
    const auto r = execute_run(config_.dag, run_id, pipeline_->tasks(), opt);
    SimRunRecord rec;
    rec.run_id = run_id;
    rec.tick = tick_;
    rec.state = r.state;
    rec.error = r.error;
    rec.version = pipeline_->version();
    rec.approved = pipeline_->approval() && pipeline_->approval()->approved;
    runs_.push_back(rec);
  }
}

void Simulation::step() {
  for (const auto& f : config_.faults) {
    if (f.at_tick != tick_) continue;
    bus_->inject_fault(f.fault);
    const bool lifted = f.fault.kind == FaultSpec::Kind::partition ||
                        (f.fault.kind == FaultSpec::Kind::delay && f.duration_ticks > 0);
    if (lifted) lifts_.emplace_back(tick_ + f.duration_ticks, f.fault);
  }
  for (auto it = lifts_.begin(); it != lifts_.end();) {
    if (it->first <= tick_) {
      if (it->second.kind == FaultSpec::Kind::partition) {
        bus_->heal(it->second.target);
      } else {
        auto undo = it->second;
        undo.delay_ms = 0;
        bus_->inject_fault(undo);
      }
      it = lifts_.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& s : specs_) {
    const auto sample = generate_tick(s, tick_);
    ++generated_[s.station];
    if (agents_.at(s.station)->step(sample) == -1) ++anomalies_[s.station];
  }
  service_round();
  maybe_run_pipeline();
  ++tick_;
}

void Simulation::run_ticks(std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) step();
}

bool Simulation::finish(int max_rounds) {
  bus_->clear_faults();
  lifts_.clear();
  bool drained = false;
  for (int round = 0; round < max_rounds && !drained; ++round) {
    for (auto& [station, a] : agents_) {
      a->poll_control();
      a->flush_batch();
      a->flush_reports();
    }
    extra_ms_ += 1000;
    service_round();
    drained = bus_->held() == 0;
    for (const auto& [station, a] : agents_) {
      if (a->pending() > 0 || a->outbox_size() > 0) drained = false;
    }
    if (deployer_->current_version() != 0 && !deployer_->complete()) drained = false;
  }
  save_state();
  return drained;
}

void Simulation::save_state() const {
  nlohmann::ordered_json j;
  j["next_tick"] = tick_;
  j["seed"] = config_.seed;
  write_file_atomic(config_.work_dir / "sim_state.json", j.dump(2) + "\n");
}

SimulationSummary Simulation::summary() const {
  SimulationSummary s;
  s.first_tick = first_tick_;
  s.next_tick = tick_;
  s.generated = generated_;
  s.anomalies = anomalies_;
  for (const auto& [station, a] : agents_) {
    s.active_versions[station] = a->active_version();
    s.pending[station] = a->pending();
  }
  s.warehouse_rows = warehouse_->size();
  s.runs = runs_;
  s.bus = bus_->stats();
  s.gateway = gateway_->stats();
  s.alerts = dispatcher_->stats();
  s.alerts_written = read_alert_file(config_.work_dir / "alerts.ndjson").size();
  return s;
}

}  // namespace edgepipe
