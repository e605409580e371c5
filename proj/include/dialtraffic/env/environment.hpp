#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <ostream>
#include <string>

#include "dialtraffic/errors.hpp"
#include "dialtraffic/sim/scenario.hpp"
#include "dialtraffic/sim/traffic.hpp"

namespace dialtraffic::env {

inline constexpr int kAgents = 2;
inline constexpr int kObservationSize = 26;
inline constexpr int kDefaultEpisodeLength = 200;
/// Divisor for summed waiting scores in observations (one full episode).
inline constexpr double kWaitScale = 200.0;

/// Observation layout, four entries per block, one per approach (N, E, S, W):
///   0:3 leader speed, 4:7 leader distance to stop line, 8:11 edge number,
///   12:15 vehicles on lane, 16:19 waiting vehicles, 20:23 summed waiting score,
///   24 direction (0 north-south, 1 east-west), 25 yellow flag.
using Observation = std::array<double, kObservationSize>;

namespace slot {
inline constexpr int kSpeed = 0;
inline constexpr int kDistance = 4;
inline constexpr int kEdge = 8;
inline constexpr int kCount = 12;
inline constexpr int kWaiting = 16;
inline constexpr int kWaitSum = 20;
inline constexpr int kDirection = 24;
inline constexpr int kYellow = 25;
}  // namespace slot

/// Same layout as Observation but in physical units: m/s, metres, lane ids,
/// vehicle counts and raw waiting scores.
inline Observation raw_observation(const sim::SimState& s, const sim::ScenarioConfig& cfg, int agent) {
  const auto lanes = sim::approach_lanes(agent);
  Observation o{};
  for (int k = 0; k < sim::kApproachesPerIntersection; ++k) {
    const auto& lane = s.lanes[static_cast<std::size_t>(lanes[static_cast<std::size_t>(k)])];
    const auto& q = s.vehicles[static_cast<std::size_t>(lane.id)];
    if (q.empty()) {
      o[slot::kSpeed + k] = 0.0;
      o[slot::kDistance + k] = lane.length;
    } else {
      o[slot::kSpeed + k] = q.front().speed;
      o[slot::kDistance + k] = lane.length - q.front().position;
    }
    o[slot::kEdge + k] = lane.edge_number;
    double waiting = 0.0;
    double wait_sum = 0.0;
    for (const auto& v : q) {
      if (v.speed < cfg.wait_speed_threshold_mps) waiting += 1.0;
      wait_sum += v.wait;
    }
    o[slot::kCount + k] = static_cast<double>(q.size());
    o[slot::kWaiting + k] = waiting;
    o[slot::kWaitSum + k] = wait_sum;
  }
  const auto& sig = s.signals[static_cast<std::size_t>(agent)];
  o[slot::kDirection] = sig.phase == sim::Phase::EastWest ? 1.0 : 0.0;
  o[slot::kYellow] = sig.yellow() ? 1.0 : 0.0;
  return o;
}

/// Scales a raw observation into [0, 1]: speeds by the limit, distances by lane
/// length, edge numbers by the lane count, vehicle counts by lane capacity and
/// waiting scores by kWaitScale. Values past 1 saturate.
inline Observation normalize_observation(const Observation& raw, const sim::ScenarioConfig& cfg) {
  Observation o{};
  const double capacity = cfg.lane_capacity();
  auto unit = [](double x) { return std::clamp(x, 0.0, 1.0); };
  for (int k = 0; k < sim::kApproachesPerIntersection; ++k) {
    o[slot::kSpeed + k] = unit(raw[slot::kSpeed + k] / cfg.speed_limit_mps);
    o[slot::kDistance + k] = unit(raw[slot::kDistance + k] / cfg.lane_length_m);
    o[slot::kEdge + k] = unit(raw[slot::kEdge + k] / sim::kLaneCount);
    o[slot::kCount + k] = unit(raw[slot::kCount + k] / capacity);
    o[slot::kWaiting + k] = unit(raw[slot::kWaiting + k] / capacity);
    o[slot::kWaitSum + k] = unit(raw[slot::kWaitSum + k] / kWaitScale);
  }
  o[slot::kDirection] = raw[slot::kDirection];
  o[slot::kYellow] = raw[slot::kYellow];
  return o;
}

inline Observation build_observation(const sim::SimState& s, const sim::ScenarioConfig& cfg, int agent) {
  return normalize_observation(raw_observation(s, cfg, agent), cfg);
}

/// Negative mean accumulated waiting score over every vehicle in the network;
/// 0 when the network is empty.
inline double compute_reward(const sim::SimState& s) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& q : s.vehicles) {
    for (const auto& v : q) {
      total += v.wait;
      ++n;
    }
  }
  return n == 0 ? 0.0 : -total / static_cast<double>(n);
}

struct JointStep {
  std::array<Observation, kAgents> observations{};
  std::array<int, kAgents> actions{};
  std::array<double, kAgents> rewards{};
  bool done = false;
};

/// Two-agent episode wrapper around the simulator. Per tick: both signal
/// actions, vehicle motion, signal countdown, spawning, waiting update, reward,
/// observations.
class TrafficEnv {
 public:
  explicit TrafficEnv(sim::ScenarioConfig cfg = {}, int episode_length = kDefaultEpisodeLength)
      : cfg_(cfg), episode_length_(episode_length) {
    cfg_.validate();
    if (episode_length_ < 1) throw ConfigError("episode_len", "must be at least 1");
    state_ = sim::make_state(cfg_, 0, 0.0);
  }

  std::array<Observation, kAgents> reset(std::uint64_t seed, double inflow_p) {
    state_ = sim::make_state(cfg_, seed, inflow_p);
    steps_ = 0;
    return observations();
  }

  JointStep step(const std::array<int, kAgents>& actions) {
    if (done()) throw UsageError("episode finished after " + std::to_string(episode_length_) + " steps; call reset");
    for (int a : actions) {
      if (a != 0 && a != 1) throw UsageError("action must be 0 (keep) or 1 (switch), got " + std::to_string(a));
    }
    for (int i = 0; i < kAgents; ++i) {
      sim::apply_signal_action(state_.signals[static_cast<std::size_t>(i)],
                               static_cast<sim::SignalAction>(actions[static_cast<std::size_t>(i)]),
                               cfg_.yellow_ticks);
    }
    sim::step_vehicles(state_, cfg_);
    for (auto& sig : state_.signals) sim::advance_signal(sig);
    sim::spawn_vehicles(state_, cfg_);
    sim::update_waiting(state_, cfg_);
    ++state_.tick;
    ++steps_;
    if (dump_ != nullptr) sim::write_dump_rows(*dump_, state_);

    JointStep js;
    const double r = compute_reward(state_);
    js.rewards.fill(r);
    js.actions = actions;
    js.observations = observations();
    js.done = done();
    return js;
  }

  std::array<Observation, kAgents> observations() const {
    return {build_observation(state_, cfg_, 0), build_observation(state_, cfg_, 1)};
  }

  /// Streams a CSV row per vehicle after every step (no header).
  void set_dump(std::ostream* out) { dump_ = out; }

  bool done() const { return steps_ >= episode_length_; }
  int steps() const { return steps_; }
  int episode_length() const { return episode_length_; }
  const sim::SimState& state() const { return state_; }
  sim::SimState& mutable_state() { return state_; }
  const sim::ScenarioConfig& scenario() const { return cfg_; }

 private:
  sim::ScenarioConfig cfg_;
  int episode_length_;
  sim::SimState state_;
  int steps_ = 0;
  std::ostream* dump_ = nullptr;
};

/// Observation of an empty network for `agent` with both signals in their reset phase.
inline Observation empty_network_observation(const sim::ScenarioConfig& cfg, int agent) {
  return build_observation(sim::make_state(cfg, 0, 0.0), cfg, agent);
}

}  // namespace dialtraffic::env
