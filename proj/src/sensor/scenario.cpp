#include "edgepipe/sensor/scenario.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "edgepipe/common/errors.hpp"
#include "edgepipe/common/rng.hpp"
#include "edgepipe/common/time_util.hpp"

namespace edgepipe {

bool Episode::active_at(std::int64_t tick) const {
  if (tick < start || duration <= 0) return false;
  if (every <= 0) return tick < start + duration;
  return (tick - start) % every < duration;
}

void ScenarioSpec::validate() const {
  if (station.empty()) throw DataError("scenario " + name + ": station is empty");
  if (tick_period <= 0) throw DataError("scenario " + name + ": tick_period must be positive");
  for (std::size_t i = 0; i < kNumSensorFields; ++i) {
    if (baseline[i].sigma < 0) {
      throw DataError("scenario " + name + ": negative sigma for " +
                      std::string(sensor_field_name(static_cast<SensorField>(i))));
    }
  }
  for (const auto& ep : episodes) {
    if (ep.start < 0 || ep.duration <= 0) {
      throw DataError("scenario " + name + ": episode " + ep.id + " has an empty window");
    }
    if (ep.every > 0 && ep.every < ep.duration) {
      throw DataError("scenario " + name + ": episode " + ep.id + " overlaps its own repeat");
    }
    if (duration_ticks) {
      const bool fits = ep.every > 0 ? ep.start < *duration_ticks
                                     : ep.start + ep.duration <= *duration_ticks;
      if (!fits) {
        throw DataError("scenario " + name + ": episode " + ep.id + " lies outside the run");
      }
    }
  }
}

ScenarioSpec parse_scenario(const KvConfig& cfg) {
  ScenarioSpec spec;
  spec.name = cfg.get_string("name", "custom");
  spec.station = cfg.require_string("station");
  spec.run_id = cfg.get_string("run_id", spec.run_id);
  if (auto epoch = cfg.get("epoch")) {
    auto t = parse_epoch_seconds(*epoch);
    if (!t) throw DataError(cfg.source() + ": bad epoch '" + *epoch + "'");
    spec.epoch = *t;
  }
  spec.tick_period = cfg.get_int("tick_period", spec.tick_period);
  spec.rng_seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  if (cfg.has("duration_ticks")) spec.duration_ticks = cfg.get_int("duration_ticks", 0);

  for (std::size_t i = 0; i < kNumSensorFields; ++i) {
    const std::string key = "baseline." + std::string(sensor_field_name(static_cast<SensorField>(i)));
    const auto value = cfg.get(key);
    if (!value) continue;
    std::istringstream in(*value);
    FieldNoise noise;
    if (!(in >> noise.mean)) throw DataError(cfg.source() + ": bad value for " + key);
    if (!(in >> noise.sigma)) noise.sigma = 0.0;
    spec.baseline[i] = noise;
  }
  for (const auto& key : cfg.keys()) {
    if (key.rfind("baseline.", 0) == 0 && !sensor_field_from_name(key.substr(9))) {
      throw DataError(cfg.source() + ": unknown field in " + key);
    }
  }

  for (const auto& id : cfg.group_names("episode")) {
    const std::string prefix = "episode." + id + ".";
    Episode ep;
    ep.id = id;
    ep.start = cfg.get_int(prefix + "start", 0);
    ep.duration = cfg.get_int(prefix + "duration", 0);
    ep.every = cfg.get_int(prefix + "every", 0);
    const std::string offset_prefix = prefix + "offset.";
    for (const auto& key : cfg.keys()) {
      if (key.rfind(offset_prefix, 0) != 0) continue;
      const auto field = sensor_field_from_name(key.substr(offset_prefix.size()));
      if (!field) throw DataError(cfg.source() + ": unknown field in " + key);
      ep.offsets[static_cast<std::size_t>(*field)] = cfg.get_double(key, 0.0);
    }
    spec.episodes.push_back(std::move(ep));
  }
  spec.validate();
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  return parse_scenario(KvConfig::load(path));
}

SensorSample generate_tick(const ScenarioSpec& spec, std::int64_t tick) {
  SensorSample s;
  s.station = spec.station;
  s.sample_id = spec.station + "/" + spec.run_id + "/" + std::to_string(tick);
  s.time_at = format_iso8601(spec.epoch + tick * spec.tick_period);

  auto rng = make_rng(spec.rng_seed, static_cast<std::uint64_t>(tick));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < kNumSensorFields; ++i) {
    // Always draw so every field consumes the same stream position.
    const double z = normal(rng);
    double v = spec.baseline[i].mean + spec.baseline[i].sigma * z;
    for (const auto& ep : spec.episodes) {
      if (ep.active_at(tick)) v += ep.offsets[i];
    }
    const auto range = sensor_field_range(static_cast<SensorField>(i));
    s.readings[i] = std::clamp(v, range.lo, range.hi);
  }
  return s;
}

std::vector<std::string> episode_mask(const ScenarioSpec& spec, std::int64_t tick) {
  std::vector<std::string> active;
  for (const auto& ep : spec.episodes) {
    if (ep.active_at(tick)) active.push_back(ep.id);
  }
  return active;
}

}  // namespace edgepipe
