#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edgepipe/common/kv_config.hpp"
#include "edgepipe/sensor/sample.hpp"

namespace edgepipe {

struct FieldNoise {
  double mean = 0.0;
  double sigma = 0.0;
};

// A scripted event: readings get `offsets` added while the episode is
// active. With every > 0 the window repeats every `every` ticks.
struct Episode {
  std::string id;
  std::int64_t start = 0;
  std::int64_t duration = 0;
  std::int64_t every = 0;
  std::array<double, kNumSensorFields> offsets{};

  bool active_at(std::int64_t tick) const;
};

struct ScenarioSpec {
  std::string name;
  std::string station;
  std::string run_id = "sim";
  std::int64_t epoch = 1648771200;  // 2022-04-01T00:00:00Z
  std::int64_t tick_period = 1;     // seconds
  std::uint64_t rng_seed = 0;
  std::optional<std::int64_t> duration_ticks;
  std::array<FieldNoise, kNumSensorFields> baseline{};
  std::vector<Episode> episodes;

  // Throws DataError on an empty station, non-positive tick period,
  // negative sigma, or an episode that does not fit in duration_ticks.
  void validate() const;
};

ScenarioSpec parse_scenario(const KvConfig& cfg);
ScenarioSpec load_scenario(const std::filesystem::path& path);

// Built-in "bedroom" and "garage" presets. Throws DataError on other names.
std::string_view scenario_preset_text(std::string_view name);
ScenarioSpec scenario_preset(std::string_view name);
std::vector<std::string> scenario_preset_names();

// Deterministic in (spec.rng_seed, tick): baseline + active episode offsets
// + Gaussian noise, clamped into sensor_field_range().
SensorSample generate_tick(const ScenarioSpec& spec, std::int64_t tick);

// Ids of the episodes active at `tick`, in spec order.
std::vector<std::string> episode_mask(const ScenarioSpec& spec, std::int64_t tick);

}  // namespace edgepipe
