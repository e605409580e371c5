#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "dialtraffic/agents/policy.hpp"
#include "dialtraffic/config.hpp"
#include "dialtraffic/sim/scenario.hpp"

namespace dialtraffic::train {

struct TrainConfig {
  agents::Method method = agents::Method::Dial;
  std::uint64_t seed = 0;
  std::int64_t epochs = 0;
  double gamma = 0.99;
  /// Multiplies rewards inside TD targets only; reported returns are unscaled.
  double reward_scale = 1.0;
  double lr = 0.0005;
  double eps_start = 1.0;
  double eps_decay = 0.99995;
  double eps_min = 0.05;
  int episodes_per_epoch = 7;
  int episode_len = 200;
  double inflow_min = 0.001;
  double inflow_max = 0.6;
  std::int64_t checkpoint_every = 100;
  /// Hidden widths of the action network.
  std::vector<std::size_t> hidden = {agents::kDefaultHidden, agents::kDefaultHidden};
  /// When false the `seconds` metrics column is written as 0 so that repeated
  /// runs produce byte-identical CSVs.
  bool wall_clock = true;
  sim::ScenarioConfig scenario;

  static std::vector<std::string> keys() {
    std::vector<std::string> k{"method",     "seed",         "epochs",           "gamma",     "lr",
                               "eps_start",  "eps_decay",    "eps_min",          "episodes_per_epoch",
                               "episode_len", "inflow_min",  "inflow_max",       "checkpoint_every",
                               "hidden",     "wall_clock",       "reward_scale"};
    for (auto& s : sim::ScenarioConfig::keys()) k.push_back(s);
    return k;
  }

  static TrainConfig from(const KeyValueConfig& kv) {
    TrainConfig c;
    c.method = agents::parse_method(kv.get_string("method", "dial"));
    const auto seed = kv.get_int("seed", 0);
    if (seed < 0) throw ConfigError("seed", "must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
    c.epochs = kv.get_int("epochs", 0);
    c.gamma = kv.get_double("gamma", c.gamma);
    c.reward_scale = kv.get_double("reward_scale", c.reward_scale);
    c.lr = kv.get_double("lr", c.lr);
    c.eps_start = kv.get_double("eps_start", c.eps_start);
    c.eps_decay = kv.get_double("eps_decay", c.eps_decay);
    c.eps_min = kv.get_double("eps_min", c.eps_min);
    c.episodes_per_epoch = static_cast<int>(kv.get_int("episodes_per_epoch", c.episodes_per_epoch));
    c.episode_len = static_cast<int>(kv.get_int("episode_len", c.episode_len));
    c.inflow_min = kv.get_double("inflow_min", c.inflow_min);
    c.inflow_max = kv.get_double("inflow_max", c.inflow_max);
    c.checkpoint_every = kv.get_int("checkpoint_every", c.checkpoint_every);
    if (kv.contains("hidden")) c.hidden = parse_widths(kv.get_string("hidden", ""));
    c.wall_clock = kv.get_int("wall_clock", 1) != 0;
    c.scenario = sim::ScenarioConfig::from(kv);
    kv.require_all_consumed();
    c.validate();
    return c;
  }

  static std::vector<std::size_t> parse_widths(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      long v = 0;
      try {
        v = std::stol(item);
      } catch (const std::logic_error&) {
        throw ConfigError("hidden", "expected comma-separated widths, got '" + s + "'");
      }
      if (v <= 0) throw ConfigError("hidden", "widths must be positive");
      out.push_back(static_cast<std::size_t>(v));
    }
    return out;
  }

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs", "must be non-negative");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma", "must lie in [0, 1]");
    if (!(reward_scale > 0.0 && std::isfinite(reward_scale))) throw ConfigError("reward_scale", "must be positive");
    if (!(lr >= 0.0)) throw ConfigError("lr", "must be non-negative");
    if (!(eps_min >= 0.0 && eps_min <= 1.0)) throw ConfigError("eps_min", "must lie in [0, 1]");
    if (!(eps_start >= eps_min && eps_start <= 1.0)) throw ConfigError("eps_start", "must lie in [eps_min, 1]");
    if (!(eps_decay > 0.0 && eps_decay <= 1.0)) throw ConfigError("eps_decay", "must lie in (0, 1]");
    if (episodes_per_epoch < 1) throw ConfigError("episodes_per_epoch", "must be at least 1");
    if (episode_len < 1) throw ConfigError("episode_len", "must be at least 1");
    if (!(inflow_min >= 0.0 && inflow_min <= 1.0)) throw ConfigError("inflow_min", "must lie in [0, 1]");
    if (!(inflow_max >= inflow_min && inflow_max <= 1.0)) throw ConfigError("inflow_max", "must lie in [inflow_min, 1]");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every", "must be at least 1");
    scenario.validate();
  }

  /// Environment interactions one epoch contributes.
  std::int64_t interactions_per_epoch() const {
    return static_cast<std::int64_t>(episodes_per_epoch) * episode_len;
  }
};

}  // namespace dialtraffic::train
