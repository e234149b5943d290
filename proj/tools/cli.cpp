#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "edgepipe/bus/tcp_transport.hpp"
#include "edgepipe/common/binary_io.hpp"
#include "edgepipe/common/csv.hpp"
#include "edgepipe/common/errors.hpp"
#include "edgepipe/common/time_util.hpp"
#include "edgepipe/experiment/experiment.hpp"
#include "edgepipe/preprocess/sensor_clean.hpp"
#include "edgepipe/sim/simulation.hpp"

namespace edgepipe::cli {

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void install_signal_handlers() {
  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

std::int64_t wall_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::int64_t wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// Keys for the demo identities: every station plus the service senders.
KeyRing demo_keyring(std::uint64_t secret, const std::vector<std::string>& stations) {
  KeyRing keys;
  for (const auto& s : stations) keys.add(s, KeyRing::derive_key(secret, s));
  for (const char* id : {"orchestrator", "gateway", "alerts"}) keys.add(id, KeyRing::derive_key(secret, id));
  return keys;
}

std::vector<std::string> preset_stations() {
  std::vector<std::string> out;
  for (const auto& name : scenario_preset_names()) out.push_back(scenario_preset(name).station);
  return out;
}

// kind:target:at_tick[:duration[:arg]]; target "*" means every sender.
ScriptedFault parse_fault(const std::string& text) {
  const auto parts = split_list(text, ':');
  if (parts.size() < 3 || parts.size() > 5) {
    throw std::invalid_argument("--fault '" + text + "': expected kind:target:at_tick[:duration[:arg]]");
  }
  ScriptedFault f;
  const auto& kind = parts[0];
  if (kind == "partition") f.fault.kind = FaultSpec::Kind::partition;
  else if (kind == "drop") f.fault.kind = FaultSpec::Kind::drop_next_n;
  else if (kind == "drop_ack") f.fault.kind = FaultSpec::Kind::drop_ack_next_n;
  else if (kind == "delay") f.fault.kind = FaultSpec::Kind::delay;
  else throw std::invalid_argument("--fault '" + text + "': kind must be partition, drop, drop_ack or delay");
  f.fault.target = parts[1] == "*" ? "" : parts[1];
  try {
    f.at_tick = std::stoll(parts[2]);
    if (parts.size() > 3) f.duration_ticks = std::stoll(parts[3]);
    if (parts.size() > 4) {
      const auto arg = std::stoll(parts[4]);
      if (f.fault.kind == FaultSpec::Kind::delay) f.fault.delay_ms = arg;
      else f.fault.n = static_cast<int>(arg);
    }
  } catch (const std::logic_error&) {
    throw std::invalid_argument("--fault '" + text + "': numbers expected after the target");
  }
  return f;
}

DagSpec load_dag(const std::string& path) {
  return path.empty() ? TrainingPipeline::default_dag() : DagSpec::load(path);
}

TrainingOptions load_training(const std::string& path) {
  return path.empty() ? TrainingOptions{} : training_options_from_config(KvConfig::load(path));
}

void print_json(std::ostream& out, const nlohmann::ordered_json& j) { out << j.dump(2) << "\n"; }

// Cluster reports of a version as <dir>/<station_dir>.csv.
std::vector<std::string> write_reports(const ModelArtifact& a, const std::filesystem::path& dir) {
  std::vector<std::string> paths;
  if (a.reports.empty()) return paths;
  std::filesystem::create_directories(dir);
  for (const auto& [station, rep] : a.reports) {
    const auto path = dir / (station_dir_name(station) + ".csv");
    std::ostringstream out;
    rep.write_csv(out);
    write_file_atomic(path, out.str());
    paths.push_back(path.string());
  }
  return paths;
}

// ---- simulate ---------------------------------------------------------

struct SimulateArgs {
  std::vector<std::string> scenarios;
  std::int64_t duration_ticks = 600;
  std::uint64_t seed = 0;
  std::string work_dir = "edgepipe-data";
  std::int64_t flush_period = 10;
  bool no_pipeline = false;
  std::int64_t pipeline_start_tick = -1;
  std::string dag;
  std::string config;
  std::vector<std::string> faults;
  std::uint64_t key_secret = 1;
  std::string webhook;
  std::string bus;
  std::int64_t tick_ms = 0;
};

void simulate_over_tcp(const SimulateArgs& a, const std::vector<ScenarioSpec>& specs, std::ostream& out) {
  const auto [host, port] = parse_host_port(a.bus);
  const std::filesystem::path dir = a.work_dir;
  std::filesystem::create_directories(dir);
  const auto state_path = dir / "sim_state.json";
  std::int64_t tick = 0;
  if (std::filesystem::exists(state_path)) {
    const auto j = nlohmann::json::parse(read_file(state_path), nullptr, false);
    if (j.is_discarded() || !j.contains("next_tick")) throw DataError("simulate: bad " + state_path.string());
    tick = j["next_tick"].get<std::int64_t>();
  }
  const auto epoch = specs.front().epoch;
  const auto period = specs.front().tick_period;
  std::vector<std::unique_ptr<TcpBusClient>> clients;
  std::vector<std::unique_ptr<EdgeAgent>> agents;
  for (const auto& s : specs) {
    const auto key = KeyRing::derive_key(a.key_secret, s.station);
    clients.push_back(std::make_unique<TcpBusClient>(host, port, s.station, key));
    if (!clients.back()->connected()) throw IoError("simulate: cannot connect to bus at " + a.bus);
    AgentConfig ac;
    ac.station = s.station;
    ac.key = key;
    ac.cache_dir = dir / "agents" / station_dir_name(s.station);
    ac.tick_period_s = period;
    ac.flush_period_s = a.flush_period;
    agents.push_back(std::make_unique<EdgeAgent>(ac, *clients.back(), [&] { return epoch + tick * period; }));
  }
  install_signal_handlers();
  const auto first = tick;
  std::uint64_t anomalies = 0;
  for (std::int64_t i = 0; i < a.duration_ticks && !g_stop; ++i, ++tick) {
    for (std::size_t k = 0; k < specs.size(); ++k) {
      if (agents[k]->step(generate_tick(specs[k], tick)) == -1) ++anomalies;
    }
    if (a.tick_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(a.tick_ms));
  }
  bool drained = false;
  for (int round = 0; round < 50 && !drained; ++round) {
    drained = true;
    for (auto& ag : agents) {
      ag->poll_control();
      ag->flush_batch();
      ag->flush_reports();
      if (ag->pending() > 0 || ag->outbox_size() > 0) drained = false;
    }
    if (!drained) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  write_file_atomic(state_path, nlohmann::ordered_json{{"next_tick", tick}, {"seed", a.seed}}.dump(2) + "\n");
  nlohmann::ordered_json j;
  j["first_tick"] = first;
  j["next_tick"] = tick;
  j["anomalies"] = anomalies;
  j["drained"] = drained;
  for (const auto& ag : agents) {
    j["active_versions"][ag->config().station] = ag->active_version();
    j["pending"][ag->config().station] = ag->pending();
  }
  print_json(out, j);
  if (!drained) throw IoError("simulate: caches not drained; bus unreachable?");
}

void run_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.duration_ticks < 0) throw std::invalid_argument("--duration-ticks must be >= 0");
  std::vector<ScenarioSpec> specs;
  for (const auto& name : a.scenarios) specs.push_back(resolve_scenario(name));
  if (a.seed != 0) {
    for (std::size_t i = 0; i < specs.size(); ++i) specs[i].rng_seed = a.seed * 1000003ULL + i;
  }
  if (!a.bus.empty()) {
    simulate_over_tcp(a, specs, out);
    return;
  }
  SimulationConfig cfg;
  cfg.work_dir = a.work_dir;
  cfg.scenarios = specs;
  cfg.seed = a.seed;
  cfg.key_secret = a.key_secret;
  cfg.flush_period_s = a.flush_period;
  cfg.pipeline = !a.no_pipeline;
  cfg.dag = load_dag(a.dag);
  cfg.training = load_training(a.config);
  cfg.webhook_url = a.webhook;
  for (const auto& text : a.faults) {
    auto f = parse_fault(text);
    if (f.fault.kind != FaultSpec::Kind::partition || !f.fault.target.empty()) {
      cfg.faults.push_back(f);
      continue;
    }
    // Partitions are per station.
    for (const auto& spec : specs) {
      f.fault.target = spec.station;
      cfg.faults.push_back(f);
    }
  }
  // Scenario seeds are already derived; keep the simulation from redoing it.
  const auto seed = cfg.seed;
  cfg.seed = 0;
  const auto period = specs.empty() ? 1 : specs.front().tick_period;
  cfg.scheduler_start_tick =
      a.pipeline_start_tick >= 0 ? a.pipeline_start_tick : cfg.dag.schedule_interval_s / std::max<std::int64_t>(period, 1);
  Simulation sim(cfg);
  install_signal_handlers();
  for (std::int64_t i = 0; i < a.duration_ticks && !g_stop; ++i) sim.step();
  const bool drained = sim.finish();
  auto j = sim.summary().to_json();
  j["seed"] = seed;
  j["drained"] = drained;
  print_json(out, j);
  if (!drained) throw IoError("simulate: caches not drained after the final flush");
}

// ---- bus / warehouse services -----------------------------------------

struct ServeArgs {
  std::uint16_t port = 1883;
  std::string bind = "127.0.0.1";
  std::uint64_t key_secret = 1;
  std::string keys;
  std::vector<std::string> stations;
  double duration_s = 0;
  std::string bus = "127.0.0.1:1883";
  std::string work_dir = "edgepipe-data";
  bool with_alerts = false;
  std::string webhook;
};

template <typename Fn>
void serve_loop(double duration_s, Fn&& tick) {
  install_signal_handlers();
  const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(duration_s);
  while (!g_stop && (duration_s <= 0 || std::chrono::steady_clock::now() < until)) tick();
}

void run_bus_serve(const ServeArgs& a, std::ostream& out) {
  auto stations = a.stations.empty() ? preset_stations() : a.stations;
  KeyRing keys = a.keys.empty() ? demo_keyring(a.key_secret, stations) : KeyRing::load(a.keys);
  InProcessBus bus(keys);
  BusServer server(bus, a.port, a.bind);
  out << "listening " << a.bind << ":" << server.port() << std::endl;
  serve_loop(a.duration_s, [] { std::this_thread::sleep_for(std::chrono::milliseconds(100)); });
  server.stop();
  const auto s = bus.stats();
  print_json(out, {{"published", s.published}, {"delivered", s.delivered},
                   {"rejected_bad_auth", s.rejected_bad_auth}, {"rejected_unknown_sender", s.rejected_unknown_sender}});
}

void run_warehouse_serve(const ServeArgs& a, std::ostream& out) {
  const auto [host, port] = parse_host_port(a.bus);
  const std::filesystem::path dir = a.work_dir;
  std::filesystem::create_directories(dir);
  TcpBusClient gw_client(host, port, "gateway", KeyRing::derive_key(a.key_secret, "gateway"));
  if (!gw_client.connected()) throw IoError("warehouse serve: cannot connect to bus at " + a.bus);
  Warehouse wh(dir / "warehouse.dat");
  IngestGateway gateway(gw_client, wh, wall_seconds);
  std::unique_ptr<TcpBusClient> alert_client;
  std::unique_ptr<AlertDispatcher> alerts;
  if (a.with_alerts) {
    alert_client = std::make_unique<TcpBusClient>(host, port, "alerts", KeyRing::derive_key(a.key_secret, "alerts"));
    AlertOptions ao;
    ao.sink = dir / "alerts.ndjson";
    ao.dead_letter = dir / "alerts.dead.ndjson";
    ao.webhook_url = a.webhook;
    alerts = std::make_unique<AlertDispatcher>(*alert_client, ao, wall_seconds);
  }
  out << "serving " << (dir / "warehouse.dat").string() << std::endl;
  serve_loop(a.duration_s, [&] {
    gateway.pump_for(std::chrono::milliseconds(100));
    if (alerts) alerts->pump();
  });
  const auto s = gateway.stats();
  print_json(out, {{"rows", wh.size()}, {"batches", s.batches}, {"stored", s.stored}, {"duplicates", s.duplicates},
                   {"malformed", s.malformed}});
}

void run_warehouse_dump(const std::string& work_dir, bool csv, bool cleaned, const std::string& out_path,
                        std::ostream& out) {
  const auto path = std::filesystem::path(work_dir) / "warehouse.dat";
  if (!std::filesystem::exists(path)) throw IoError("warehouse dump: no warehouse at " + path.string());
  Warehouse wh(path);
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw IoError("warehouse dump: cannot write " + out_path);
  }
  std::ostream& o = out_path.empty() ? out : file;
  if (cleaned) {
    const auto res = clean_sensor(samples_to_table(wh.scan_all()), StationCodes{});
    if (csv) {
      const auto t = cleaned_to_table(res.features);
      write_csv_row(o, t.header);
      for (const auto& row : t.rows) {
        std::vector<std::string> fields;
        for (const auto& f : row) fields.push_back(f.value_or(""));
        write_csv_row(o, fields);
      }
    } else {
      for (std::size_t r = 0; r < res.features.rows(); ++r) {
        nlohmann::ordered_json j;
        j[res.features.id_column] = res.features.row_ids[r];
        for (std::size_t c = 0; c < res.features.cols(); ++c) {
          j[res.features.column_names[c]] = res.features.values(r, c);
        }
        o << j.dump() << "\n";
      }
    }
    return;
  }
  if (csv) {
    wh.export_csv(o);
  } else {
    for (const auto& s : wh.scan_all()) o << sample_to_json(s).dump() << "\n";
  }
}

// ---- pipeline ---------------------------------------------------------

struct PipelineArgs {
  std::string work_dir = "edgepipe-data";
  std::string dag;
  std::string config;
  std::int64_t now = 0;
  std::string bus;
  std::uint64_t key_secret = 1;
  std::int64_t max_runs = 0;
  std::int64_t poll_ms = 1000;
  std::int64_t deploy_timeout_ms = 10000;
};

struct PipelineRig {
  std::filesystem::path dir;
  DagSpec dag;
  Warehouse warehouse;
  ModelRegistry registry;
  RunLedger ledger;
  std::unique_ptr<TcpBusClient> client;
  std::unique_ptr<Deployer> deployer;
  std::unique_ptr<TrainingPipeline> pipeline;

  PipelineRig(const PipelineArgs& a, std::function<std::int64_t()> clock)
      : dir(a.work_dir),
        dag(load_dag(a.dag)),
        warehouse((std::filesystem::create_directories(dir), dir / "warehouse.dat")),
        registry(dir / "registry"),
        ledger(dir / "runs.ndjson") {
    TrainingPipeline::Deploy hook;
    if (!a.bus.empty()) {
      const auto [host, port] = parse_host_port(a.bus);
      const auto key = KeyRing::derive_key(a.key_secret, "orchestrator");
      client = std::make_unique<TcpBusClient>(host, port, "orchestrator", key);
      if (!client->connected()) throw IoError("pipeline: cannot connect to bus at " + a.bus);
      DeployOptions d;
      d.key = key;
      d.stations = preset_stations();
      deployer = std::make_unique<Deployer>(*client, d, wall_ms);
      const auto timeout = std::chrono::milliseconds(a.deploy_timeout_ms);
      hook = [this, timeout](const ModelArtifact& art) {
        deployer->deploy(art);
        deployer->wait(timeout);
      };
    }
    pipeline = std::make_unique<TrainingPipeline>(warehouse, registry, load_training(a.config), clock, hook);
  }

  nlohmann::ordered_json run(const std::string& run_id, std::int64_t now) {
    ExecutorOptions opt;
    opt.ledger = &ledger;
    opt.log_dir = dir / "logs";
    opt.clock = [now] { return now; };
    const auto r = execute_run(dag, run_id, pipeline->tasks(), opt);
    nlohmann::ordered_json j;
    j["run_id"] = run_id;
    j["state"] = run_state_name(r.state);
    j["error"] = r.error;
    j["version"] = pipeline->version() ? nlohmann::ordered_json(*pipeline->version()) : nlohmann::ordered_json();
    j["approved"] = pipeline->approval() && pipeline->approval()->approved;
    j["deployed"] = pipeline->deployed();
    j["rows"] = pipeline->scanned().size();
    if (pipeline->version()) {
      const auto art = registry.load(*pipeline->version());
      j["reports"] = write_reports(art, dir / "reports" / ("v" + std::to_string(art.version)));
    }
    if (deployer) {
      for (const auto& [station, receipt] : deployer->receipts()) j["receipts"][station] = receipt.to_json();
    }
    j["log_dir"] = (dir / "logs" / run_id).string();
    return j;
  }
};

void run_pipeline_once(const PipelineArgs& a, std::ostream& out) {
  const auto now = a.now > 0 ? a.now : wall_seconds();
  PipelineRig rig(a, [now] { return now; });
  std::size_t manual = 0;
  for (const auto& e : rig.ledger.events()) {
    if (e.value("event", "") == "run_started" && e.value("run_id", "").find("-manual-") != std::string::npos) {
      ++manual;
    }
  }
  char id[32];
  std::snprintf(id, sizeof id, "%06zu", manual + 1);
  const auto j = rig.run(rig.dag.name + "-manual-" + id, now);
  print_json(out, j);
  if (j["state"] != "success") throw IoError("pipeline run failed: " + j["error"].get<std::string>());
}

void run_pipeline_schedule(const PipelineArgs& a, std::ostream& out) {
  PipelineRig rig(a, wall_seconds);
  Scheduler scheduler(rig.dag, rig.ledger);
  install_signal_handlers();
  std::int64_t runs = 0;
  while (!g_stop && (a.max_runs <= 0 || runs < a.max_runs)) {
    for (const auto& run_id : scheduler.schedule(wall_seconds())) {
      out << rig.run(run_id, wall_seconds()).dump() << std::endl;
      ++runs;
      if (a.max_runs > 0 && runs >= a.max_runs) break;
    }
    if (rig.deployer) {
      rig.deployer->pump();
      rig.deployer->retry_due();
    }
    if (a.max_runs <= 0 || runs < a.max_runs) std::this_thread::sleep_for(std::chrono::milliseconds(a.poll_ms));
  }
}

// ---- registry / alerts / reports --------------------------------------

void run_registry_list(const std::string& work_dir, bool json, std::ostream& out) {
  ModelRegistry reg(std::filesystem::path(work_dir) / "registry");
  const auto entries = reg.list();
  if (json) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
      arr.push_back({{"version", e.version}, {"approved", e.approved}, {"trained_at", e.trained_at},
                     {"training_rows", e.training_rows}, {"test_flag_rate", e.test_flag_rate},
                     {"approved_at", e.approved_at}, {"note", e.note}});
    }
    print_json(out, arr);
    return;
  }
  out << "version\tapproved\ttrained_at\ttraining_rows\ttest_flag_rate\tnote\n";
  for (const auto& e : entries) {
    out << e.version << "\t" << (e.approved ? "yes" : "no") << "\t" << e.trained_at << "\t" << e.training_rows
        << "\t" << format_double(e.test_flag_rate) << "\t" << e.note << "\n";
  }
}

void run_registry_approve(const std::string& work_dir, std::int64_t version, bool force, double contamination,
                          double band, std::ostream& out) {
  ModelRegistry reg(std::filesystem::path(work_dir) / "registry");
  ApprovalCriteria c;
  c.contamination = contamination;
  c.band = band;
  const auto o = reg.approve(version, c, force, format_iso8601(wall_seconds()));
  print_json(out, {{"version", o.version}, {"approved", o.approved}, {"already", o.already}, {"forced", o.forced},
                   {"flag_rate", o.flag_rate}, {"reason", o.reason}});
  if (!o.approved) throw DataError("version " + std::to_string(version) + " not approved: " + o.reason);
}

void run_alerts_tail(const std::string& work_dir, std::size_t n, bool dead, bool follow, std::ostream& out) {
  const auto path = std::filesystem::path(work_dir) / (dead ? "alerts.dead.ndjson" : "alerts.ndjson");
  std::vector<std::string> lines;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) lines.push_back(line);
    }
  }
  const auto start = lines.size() > n ? lines.size() - n : 0;
  for (auto i = start; i < lines.size(); ++i) out << lines[i] << "\n";
  out.flush();
  if (!follow) return;
  install_signal_handlers();
  std::size_t seen = lines.size();
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(250));
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path);
    std::size_t k = 0;
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      if (k++ >= seen) out << line << std::endl;
    }
    seen = std::max(seen, k);
  }
}

void run_report_clusters(const std::string& work_dir, std::int64_t version, const std::string& station,
                         const std::string& format, std::ostream& out) {
  ModelRegistry reg(std::filesystem::path(work_dir) / "registry");
  if (version <= 0) version = reg.max_version();
  if (version <= 0) throw DataError("report clusters: registry is empty");
  const auto art = reg.load(version);
  if (!station.empty() && !art.reports.count(station)) {
    throw DataError("report clusters: version " + std::to_string(version) + " has no report for " + station);
  }
  if (format == "json") {
    nlohmann::ordered_json j;
    j["version"] = version;
    for (const auto& [s, rep] : art.reports) {
      if (station.empty() || s == station) j["stations"][s] = rep.to_json();
    }
    print_json(out, j);
    return;
  }
  for (const auto& [s, rep] : art.reports) {
    if (!station.empty() && s != station) continue;
    out << "# " << s << " v" << version << "\n";
    rep.write_csv(out);
  }
}

// ---- experiment -------------------------------------------------------

void run_experiment_cmd(const std::string& config, const std::string& out_path, std::int64_t seed,
                        std::int64_t trials, bool no_timing, std::ostream& out) {
  auto cfg = ExperimentConfig::load(config);
  if (seed > 0) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.synthetic.seed = cfg.seed;
  }
  if (trials > 0) cfg.trials = static_cast<std::size_t>(trials);
  if (no_timing) cfg.record_timing = false;
  const auto rep = run_experiment(cfg);
  std::ostringstream csv;
  rep.write_csv(csv);
  if (out_path.empty()) {
    out << csv.str();
  } else {
    write_file_atomic(out_path, csv.str());
    out << "wrote " << out_path << " (" << rep.cells.size() << " cells, " << rep.rows << " rows, "
        << rep.positives << " positives)\n";
  }
}

void run_experiment_synth(std::size_t rows, std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  SyntheticLabeledOptions o;
  o.rows = rows;
  o.seed = seed;
  std::ostringstream csv;
  write_labeled_csv(csv, synthetic_labeled(o));
  if (out_path.empty()) out << csv.str();
  else write_file_atomic(out_path, csv.str());
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

std::unique_ptr<CLI::App> make_app(std::ostream& out) {
  auto app = std::make_unique<CLI::App>("edgepipe: IoT sensor anomaly-detection pipeline", "edgepipe");
  app->require_subcommand(1);
  app->set_help_all_flag("--help-all", "Print help for every subcommand and exit");

  // simulate
  {
    auto a = std::make_shared<SimulateArgs>();
    auto* sub = app->add_subcommand("simulate", "Run edge agents on scenarios with the bus, gateway, warehouse, "
                                                "scheduler and alert dispatcher in one process");
    sub->add_option("--scenario", a->scenarios, "Scenario preset (garage, bedroom) or scenario config path; repeatable")
        ->default_val(std::vector<std::string>{"garage", "bedroom"});
    sub->add_option("--duration-ticks", a->duration_ticks, "Ticks to simulate in this invocation")->default_val(600);
    sub->add_option("--seed", a->seed, "Derive every scenario seed from this value (0 keeps the scenario seeds)")
        ->default_val(0);
    sub->add_option("--work-dir", a->work_dir, "State directory (warehouse, registry, caches, alerts)")
        ->default_val("edgepipe-data");
    sub->add_option("--flush-period", a->flush_period, "Agent batch flush period in seconds")->default_val(10);
    sub->add_flag("--no-pipeline", a->no_pipeline, "Do not consult the retraining scheduler");
    sub->add_option("--pipeline-start-tick", a->pipeline_start_tick,
                    "Absolute tick of the first scheduler check (default: one schedule interval)")
        ->default_val(-1);
    sub->add_option("--dag", a->dag, "DAG spec file (default: built-in retrain DAG)");
    sub->add_option("--config", a->config, "Training options file (key = value)");
    sub->add_option("--fault", a->faults,
                    "Scripted bus fault kind:target:at_tick[:duration[:arg]]; kind is partition, drop, drop_ack "
                    "or delay; target * means every sender; arg is n or delay ms; repeatable");
    sub->add_option("--key-secret", a->key_secret, "Secret the demo HMAC keys are derived from")->default_val(1);
    sub->add_option("--webhook", a->webhook, "POST every alert to this http:// URL");
    sub->add_option("--bus", a->bus, "Run only the agents, against a bus at host:port (see 'bus serve')");
    sub->add_option("--tick-ms", a->tick_ms, "With --bus: wall-clock milliseconds per tick")->default_val(0);
    sub->callback([a, &out] { run_simulate(*a, out); });
  }

  // bus serve
  {
    auto a = std::make_shared<ServeArgs>();
    auto* bus = app->add_subcommand("bus", "Message bus service");
    bus->require_subcommand(1);
    auto* sub = bus->add_subcommand("serve", "Serve the authenticated pub/sub bus over TCP");
    sub->add_option("--port", a->port, "TCP port (0 picks a free one; printed on the first line)")->default_val(1883);
    sub->add_option("--bind", a->bind, "Address to bind")->default_val("127.0.0.1");
    sub->add_option("--key-secret", a->key_secret, "Secret the demo HMAC keys are derived from")->default_val(1);
    sub->add_option("--keys", a->keys, "Key ring file (<sender> = <hex key> per line) instead of derived keys");
    sub->add_option("--station", a->stations, "Station identity to admit with a derived key; repeatable "
                                              "(default: the preset stations)");
    sub->add_option("--duration-s", a->duration_s, "Stop after this many seconds (0 runs until SIGINT)")
        ->default_val(0);
    sub->callback([a, &out] { run_bus_serve(*a, out); });
  }

  // warehouse serve|dump
  {
    auto* wh = app->add_subcommand("warehouse", "Sample warehouse");
    wh->require_subcommand(1);
    auto a = std::make_shared<ServeArgs>();
    auto* serve = wh->add_subcommand("serve", "Ingest sample batches from the TCP bus into the warehouse");
    serve->add_option("--bus", a->bus, "Bus address host:port")->default_val("127.0.0.1:1883");
    serve->add_option("--work-dir", a->work_dir, "State directory holding warehouse.dat")->default_val("edgepipe-data");
    serve->add_option("--key-secret", a->key_secret, "Secret the demo HMAC keys are derived from")->default_val(1);
    serve->add_option("--duration-s", a->duration_s, "Stop after this many seconds (0 runs until SIGINT)")
        ->default_val(0);
    serve->add_flag("--with-alerts", a->with_alerts, "Also run the alert dispatcher (alerts.ndjson)");
    serve->add_option("--webhook", a->webhook, "With --with-alerts: POST every alert to this http:// URL");
    serve->callback([a, &out] { run_warehouse_serve(*a, out); });

    auto d = std::make_shared<std::tuple<std::string, bool, bool, std::string>>("edgepipe-data", false, false, "");
    auto* dump = wh->add_subcommand("dump", "Print every stored sample");
    dump->add_option("--work-dir", std::get<0>(*d), "State directory holding warehouse.dat")
        ->default_val("edgepipe-data");
    dump->add_flag("--csv", std::get<1>(*d), "CSV with a header instead of NDJSON");
    dump->add_flag("--cleaned", std::get<2>(*d), "Apply the sensor cleaning steps first");
    dump->add_option("--out", std::get<3>(*d), "Write to this file instead of stdout");
    dump->callback([d, &out] { run_warehouse_dump(std::get<0>(*d), std::get<1>(*d), std::get<2>(*d), std::get<3>(*d), out); });
  }

  // pipeline run-once|schedule
  {
    auto* p = app->add_subcommand("pipeline", "Retraining workflow");
    p->require_subcommand(1);
    auto add_common = [](CLI::App* sub, PipelineArgs& a) {
      sub->add_option("--work-dir", a.work_dir, "State directory (warehouse, registry, runs.ndjson, logs)")
          ->default_val("edgepipe-data");
      sub->add_option("--dag", a.dag, "DAG spec file (default: built-in retrain DAG)");
      sub->add_option("--config", a.config, "Training options file (key = value)");
      sub->add_option("--bus", a.bus, "Deploy approved models over the bus at host:port");
      sub->add_option("--key-secret", a.key_secret, "Secret the demo HMAC keys are derived from")->default_val(1);
      sub->add_option("--deploy-timeout-ms", a.deploy_timeout_ms, "With --bus: wait this long for receipts")
          ->default_val(10000);
    };
    auto once = std::make_shared<PipelineArgs>();
    auto* run_once = p->add_subcommand("run-once", "Run the DAG once now");
    add_common(run_once, *once);
    run_once->add_option("--now", once->now, "Run time as epoch seconds (default: wall clock)")->default_val(0);
    run_once->callback([once, &out] { run_pipeline_once(*once, out); });

    auto sched = std::make_shared<PipelineArgs>();
    auto* schedule = p->add_subcommand("schedule", "Run the scheduler loop on the wall clock");
    add_common(schedule, *sched);
    schedule->add_option("--max-runs", sched->max_runs, "Exit after this many runs (0 runs until SIGINT)")
        ->default_val(0);
    schedule->add_option("--poll-ms", sched->poll_ms, "Scheduler poll period in milliseconds")->default_val(1000);
    schedule->callback([sched, &out] { run_pipeline_schedule(*sched, out); });
  }

  // registry list|approve
  {
    auto* r = app->add_subcommand("registry", "Model registry");
    r->require_subcommand(1);
    auto l = std::make_shared<std::pair<std::string, bool>>("edgepipe-data", false);
    auto* list = r->add_subcommand("list", "List model versions");
    list->add_option("--work-dir", l->first, "State directory holding registry/")->default_val("edgepipe-data");
    list->add_flag("--json", l->second, "JSON array instead of a table");
    list->callback([l, &out] { run_registry_list(l->first, l->second, out); });

    struct ApproveArgs {
      std::string work_dir = "edgepipe-data";
      std::int64_t version = 0;
      bool force = false;
      double contamination = 0.05;
      double band = 0.02;
    };
    auto a = std::make_shared<ApproveArgs>();
    auto* approve = r->add_subcommand("approve", "Approve a version against the flag-rate criteria");
    approve->add_option("--work-dir", a->work_dir, "State directory holding registry/")->default_val("edgepipe-data");
    approve->add_option("--version", a->version, "Model version")->required();
    approve->add_flag("--force", a->force, "Approve even when the criteria fail");
    approve->add_option("--contamination", a->contamination, "Expected test flag rate")->default_val(0.05);
    approve->add_option("--band", a->band, "Allowed distance from the expected flag rate")->default_val(0.02);
    approve->callback([a, &out] { run_registry_approve(a->work_dir, a->version, a->force, a->contamination, a->band, out); });
  }

  // alerts tail
  {
    auto* al = app->add_subcommand("alerts", "Alert records");
    al->require_subcommand(1);
    struct TailArgs {
      std::string work_dir = "edgepipe-data";
      std::size_t n = 10;
      bool dead = false;
      bool follow = false;
    };
    auto a = std::make_shared<TailArgs>();
    auto* tail = al->add_subcommand("tail", "Print the newest alert records (NDJSON)");
    tail->add_option("--work-dir", a->work_dir, "State directory holding alerts.ndjson")->default_val("edgepipe-data");
    tail->add_option("-n,--lines", a->n, "Number of records")->default_val(10);
    tail->add_flag("--dead-letter", a->dead, "Read alerts.dead.ndjson instead");
    tail->add_flag("-f,--follow", a->follow, "Keep printing new records until SIGINT");
    tail->callback([a, &out] { run_alerts_tail(a->work_dir, a->n, a->dead, a->follow, out); });
  }

  // experiment run|synth
  {
    auto* e = app->add_subcommand("experiment", "Supervised RF/GBT experiment with and without SMOTE");
    e->require_subcommand(1);
    struct RunArgs {
      std::string config;
      std::string out;
      std::int64_t seed = 0;
      std::int64_t trials = 0;
      bool no_timing = false;
    };
    auto a = std::make_shared<RunArgs>();
    auto* run_cmd = e->add_subcommand("run", "Run the experiment grid and write the report CSV");
    run_cmd->add_option("--config", a->config, "Experiment config file")->required();
    run_cmd->add_option("--out", a->out, "Report CSV path (default: stdout)");
    run_cmd->add_option("--seed", a->seed, "Override the config seed (also the synthetic data seed)")->default_val(0);
    run_cmd->add_option("--trials", a->trials, "Override the TPE trial budget")->default_val(0);
    run_cmd->add_flag("--no-timing", a->no_timing, "Report fit_seconds as 0 for byte-comparable output");
    run_cmd->callback([a, &out] { run_experiment_cmd(a->config, a->out, a->seed, a->trials, a->no_timing, out); });

    auto s = std::make_shared<std::tuple<std::size_t, std::uint64_t, std::string>>(10000, 1, "");
    auto* synth = e->add_subcommand("synth", "Write the synthetic labeled dataset as a 13-column CSV");
    synth->add_option("--rows", std::get<0>(*s), "Row count")->default_val(10000);
    synth->add_option("--seed", std::get<1>(*s), "Generator seed")->default_val(1);
    synth->add_option("--out", std::get<2>(*s), "CSV path (default: stdout)");
    synth->callback([s, &out] { run_experiment_synth(std::get<0>(*s), std::get<1>(*s), std::get<2>(*s), out); });
  }

  // report clusters
  {
    auto* rp = app->add_subcommand("report", "Reports");
    rp->require_subcommand(1);
    struct ClusterArgs {
      std::string work_dir = "edgepipe-data";
      std::int64_t version = 0;
      std::string station;
      std::string format = "csv";
    };
    auto a = std::make_shared<ClusterArgs>();
    auto* cl = rp->add_subcommand("clusters", "Cluster report of anomalous rows for a model version");
    cl->add_option("--work-dir", a->work_dir, "State directory holding registry/")->default_val("edgepipe-data");
    cl->add_option("--version", a->version, "Model version (default: newest)")->default_val(0);
    cl->add_option("--station", a->station, "Only this station path");
    cl->add_option("--format", a->format, "csv or json")->default_val("csv")->check(CLI::IsMember({"csv", "json"}));
    cl->callback([a, &out] { run_report_clusters(a->work_dir, a->version, a->station, a->format, out); });
  }
  return app;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto app = make_app(out);
  try {
    app->parse(argc, argv);
    return kOk;
  } catch (const CLI::CallForHelp& e) {
    out << app->help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app->help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "error: data: " << one_line(e.what()) << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: runtime: " << one_line(e.what()) << "\n";
    return kRuntime;
  }
}

}  // namespace edgepipe::cli
