#pragma once

#include <string>
#include <vector>

#include "dialtraffic/config.hpp"
#include "dialtraffic/errors.hpp"

namespace dialtraffic::sim {

/// Physical constants of the two-intersection scenario. Units: metres, seconds.
struct ScenarioConfig {
  double lane_length_m = 100.0;
  double speed_limit_mps = 13.9;
  int yellow_ticks = 3;
  double a_max = 2.0;
  double b_max = 4.5;
  double min_gap_m = 2.0;
  double vehicle_length_m = 5.0;
  double wait_speed_threshold_mps = 0.894;  // 2 mph
  double dt_s = 1.0;

  static std::vector<std::string> keys() {
    return {"lane_length_m", "speed_limit_mps", "yellow_ticks",     "a_max",
            "b_max",         "min_gap_m",       "vehicle_length_m", "wait_speed_threshold_mps",
            "dt_s"};
  }

  /// Reads the scenario keys from `kv`; missing keys keep their defaults.
  static ScenarioConfig from(const KeyValueConfig& kv) {
    ScenarioConfig c;
    c.lane_length_m = kv.get_double("lane_length_m", c.lane_length_m);
    c.speed_limit_mps = kv.get_double("speed_limit_mps", c.speed_limit_mps);
    c.yellow_ticks = static_cast<int>(kv.get_int("yellow_ticks", c.yellow_ticks));
    c.a_max = kv.get_double("a_max", c.a_max);
    c.b_max = kv.get_double("b_max", c.b_max);
    c.min_gap_m = kv.get_double("min_gap_m", c.min_gap_m);
    c.vehicle_length_m = kv.get_double("vehicle_length_m", c.vehicle_length_m);
    c.wait_speed_threshold_mps = kv.get_double("wait_speed_threshold_mps", c.wait_speed_threshold_mps);
    c.dt_s = kv.get_double("dt_s", c.dt_s);
    c.validate();
    return c;
  }

  void validate() const {
    auto positive = [](const char* key, double v) {
      if (!(v > 0.0)) throw ConfigError(key, "must be positive, got " + std::to_string(v));
    };
    positive("lane_length_m", lane_length_m);
    positive("speed_limit_mps", speed_limit_mps);
    positive("a_max", a_max);
    positive("b_max", b_max);
    positive("vehicle_length_m", vehicle_length_m);
    positive("dt_s", dt_s);
    if (yellow_ticks < 1) throw ConfigError("yellow_ticks", "must be at least 1");
    if (!(min_gap_m >= 0.0)) throw ConfigError("min_gap_m", "must be non-negative");
    if (!(wait_speed_threshold_mps >= 0.0)) throw ConfigError("wait_speed_threshold_mps", "must be non-negative");
    if (lane_length_m < 2.0 * (vehicle_length_m + min_gap_m)) {
      throw ConfigError("lane_length_m", "must hold at least two vehicles");
    }
  }

  /// Number of vehicles a lane holds bumper to bumper; used to scale counts.
  double lane_capacity() const { return lane_length_m / (vehicle_length_m + min_gap_m); }
};

}  // namespace dialtraffic::sim
