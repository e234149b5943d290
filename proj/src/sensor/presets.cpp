#include "edgepipe/common/errors.hpp"
#include "edgepipe/sensor/scenario.hpp"

// Keep in sync with config/scenarios/*.conf (checked by the sensor tests).

namespace edgepipe {

namespace {

constexpr std::string_view kBedroom = R"conf(# Bedroom station: one person living and working in the room.
name = bedroom
station = daniel/house/bedroom/pi4
run_id = sim
epoch = 2022-04-01T00:00:00Z
tick_period = 1
seed = 11

# baseline.<field> = mean sigma
baseline.temperature = 21.5 0.15
baseline.humidity = 42.0 0.4
baseline.pressure = 1003.2 0.05
baseline.lux = 60.0 2.0
baseline.color_r = 210.0 6.0
baseline.color_g = 240.0 6.0
baseline.color_b = 190.0 6.0
baseline.color_temp = 4100.0 30.0
baseline.accel_x = 0.012 0.001
baseline.accel_y = -0.020 0.001
baseline.accel_z = 0.998 0.001
baseline.gyro_x = 0.0 0.15
baseline.gyro_y = 0.0 0.15
baseline.gyro_z = 0.0 0.15
baseline.magnetic_x = 0.21 0.004
baseline.magnetic_y = -0.08 0.004
baseline.magnetic_z = 0.43 0.004

# Lights and computer screen on, door closed: warmer and brighter.
episode.working.start = 120
episode.working.duration = 90
episode.working.every = 1500
episode.working.offset.lux = 240
episode.working.offset.temperature = 2.8
episode.working.offset.humidity = -2.0
episode.working.offset.color_r = 600
episode.working.offset.color_g = 650
episode.working.offset.color_b = 700
episode.working.offset.color_temp = 1500

# Someone picks up or bumps the Raspberry Pi.
episode.device_moved.start = 700
episode.device_moved.duration = 6
episode.device_moved.every = 1500
episode.device_moved.offset.accel_x = 0.3
episode.device_moved.offset.accel_y = 0.2
episode.device_moved.offset.gyro_x = 120
episode.device_moved.offset.gyro_y = -80
episode.device_moved.offset.magnetic_x = 0.15
episode.device_moved.offset.magnetic_y = 0.1
)conf";

constexpr std::string_view kGarage = R"conf(# Garage station: dark most of the time.
name = garage
station = daniel/house/garage/pi3
run_id = sim
epoch = 2022-04-01T00:00:00Z
tick_period = 1
seed = 7

# baseline.<field> = mean sigma
baseline.temperature = 11.5 0.2
baseline.humidity = 58.0 0.5
baseline.pressure = 1004.0 0.05
baseline.lux = 1.5 0.5
baseline.color_r = 12.0 2.0
baseline.color_g = 14.0 2.0
baseline.color_b = 10.0 2.0
baseline.color_temp = 2900.0 40.0
baseline.accel_x = 0.005 0.001
baseline.accel_y = 0.010 0.001
baseline.accel_z = 1.001 0.001
baseline.gyro_x = 0.0 0.15
baseline.gyro_y = 0.0 0.15
baseline.gyro_z = 0.0 0.15
baseline.magnetic_x = -0.12 0.004
baseline.magnetic_y = 0.33 0.004
baseline.magnetic_z = -0.27 0.004

# Someone walks in and switches the light on.
episode.lights_on.start = 300
episode.lights_on.duration = 25
episode.lights_on.every = 1200
episode.lights_on.offset.lux = 180
episode.lights_on.offset.color_r = 420
episode.lights_on.offset.color_g = 460
episode.lights_on.offset.color_b = 380
episode.lights_on.offset.color_temp = 700

# Garage door opens: daylight plus outside air.
episode.door_open.start = 900
episode.door_open.duration = 30
episode.door_open.every = 1800
episode.door_open.offset.lux = 1800
episode.door_open.offset.temperature = 4.5
episode.door_open.offset.humidity = 9.0
episode.door_open.offset.color_r = 2200
episode.door_open.offset.color_g = 2400
episode.door_open.offset.color_b = 2000
episode.door_open.offset.color_temp = 2600
)conf";

}  // namespace

std::string_view scenario_preset_text(std::string_view name) {
  if (name == "bedroom") return kBedroom;
  if (name == "garage") return kGarage;
  throw DataError("unknown scenario preset '" + std::string(name) + "'");
}

ScenarioSpec scenario_preset(std::string_view name) {
  return parse_scenario(
      KvConfig::parse_string(std::string(scenario_preset_text(name)), std::string(name)));
}

std::vector<std::string> scenario_preset_names() { return {"bedroom", "garage"}; }

}  // namespace edgepipe
