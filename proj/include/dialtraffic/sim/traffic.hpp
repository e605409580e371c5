#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "dialtraffic/errors.hpp"
#include "dialtraffic/rng.hpp"
#include "dialtraffic/sim/scenario.hpp"

namespace dialtraffic::sim {

enum class LaneKind { Entry, Internal, Exit };

/// Side of the intersection an approach lane arrives from. The numeric value is
/// the lane's slot in an agent's observation.
enum class Approach { North = 0, East = 1, South = 2, West = 3 };

enum class Phase { NorthSouth = 0, EastWest = 1 };

enum class SignalAction { Keep = 0, Switch = 1 };

inline constexpr int kIntersections = 2;
inline constexpr int kApproachesPerIntersection = 4;
inline constexpr int kLaneCount = 14;

struct Lane {
  int id = 0;
  double length = 0.0;
  double speed_limit = 0.0;
  LaneKind kind = LaneKind::Entry;
  int intersection = -1;  // intersection this lane feeds; -1 for exit lanes
  Approach approach = Approach::North;
  int next = -1;  // lane entered after the stop line; -1 for exit lanes
  int edge_number = 0;
};

struct Vehicle {
  std::int64_t id = 0;
  int lane = 0;
  double position = 0.0;  // front bumper, metres from lane start
  double speed = 0.0;
  double wait = 0.0;  // accumulated waiting score

  bool operator==(const Vehicle&) const = default;
};

struct SignalController {
  int intersection = 0;
  Phase phase = Phase::NorthSouth;
  int yellow_remaining = 0;
  Phase pending = Phase::NorthSouth;

  bool yellow() const { return yellow_remaining > 0; }

  /// Whether traffic from `a` may cross the stop line this tick.
  bool allows(Approach a) const {
    if (yellow()) return false;
    const bool ns = a == Approach::North || a == Approach::South;
    return ns == (phase == Phase::NorthSouth);
  }

  bool operator==(const SignalController&) const = default;
};

/// Starts a yellow transition toward the opposite phase. Ignored while yellow.
inline void apply_signal_action(SignalController& c, SignalAction action, int yellow_ticks) {
  if (action != SignalAction::Switch || c.yellow()) return;
  c.yellow_remaining = yellow_ticks;
  c.pending = c.phase == Phase::NorthSouth ? Phase::EastWest : Phase::NorthSouth;
}

/// Counts down an active yellow; the pending phase takes over when it hits 0.
inline void advance_signal(SignalController& c) {
  if (!c.yellow()) return;
  if (--c.yellow_remaining == 0) c.phase = c.pending;
}

// Lane layout. Intersection 0 is west of intersection 1; the shared road is a
// pair of internal lanes (eastbound 7, westbound 1). Every movement is straight
// through.
//
//   id  role                               next
//   0   I0 north approach (entry)          8  I0 south exit
//   1   I0 east approach  (internal, W)    10 I0 west exit
//   2   I0 south approach (entry)          9  I0 north exit
//   3   I0 west approach  (entry)          7
//   4   I1 north approach (entry)          11 I1 south exit
//   5   I1 east approach  (entry)          1
//   6   I1 south approach (entry)          12 I1 north exit
//   7   I1 west approach  (internal, E)    13 I1 east exit
inline std::vector<Lane> build_lanes(const ScenarioConfig& cfg) {
  struct Row {
    LaneKind kind;
    int intersection;
    Approach approach;
    int next;
  };
  static constexpr std::array<Row, kLaneCount> rows{{
      {LaneKind::Entry, 0, Approach::North, 8},
      {LaneKind::Internal, 0, Approach::East, 10},
      {LaneKind::Entry, 0, Approach::South, 9},
      {LaneKind::Entry, 0, Approach::West, 7},
      {LaneKind::Entry, 1, Approach::North, 11},
      {LaneKind::Entry, 1, Approach::East, 1},
      {LaneKind::Entry, 1, Approach::South, 12},
      {LaneKind::Internal, 1, Approach::West, 13},
      {LaneKind::Exit, -1, Approach::North, -1},
      {LaneKind::Exit, -1, Approach::North, -1},
      {LaneKind::Exit, -1, Approach::North, -1},
      {LaneKind::Exit, -1, Approach::North, -1},
      {LaneKind::Exit, -1, Approach::North, -1},
      {LaneKind::Exit, -1, Approach::North, -1},
  }};
  std::vector<Lane> lanes;
  for (int i = 0; i < kLaneCount; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    lanes.push_back(Lane{i, cfg.lane_length_m, cfg.speed_limit_mps, r.kind, r.intersection, r.approach, r.next, i});
  }
  return lanes;
}

/// Approach lane ids of an intersection in observation order (N, E, S, W).
inline std::array<int, kApproachesPerIntersection> approach_lanes(int intersection) {
  if (intersection == 0) return {0, 1, 2, 3};
  if (intersection == 1) return {4, 5, 6, 7};
  throw UsageError("intersection id must be 0 or 1, got " + std::to_string(intersection));
}

inline constexpr std::array<int, 6> kEntryLanes{0, 2, 3, 4, 5, 6};

/// Downstream lanes come first so every leader has moved before its follower.
inline constexpr std::array<int, kLaneCount> kUpdateOrder{8, 9, 10, 11, 12, 13, 1, 7, 0, 2, 3, 4, 5, 6};

struct SimState {
  std::int64_t tick = 0;
  std::vector<Lane> lanes;
  std::vector<std::vector<Vehicle>> vehicles;  // per lane, front-most first
  std::array<SignalController, kIntersections> signals{};
  Rng rng;
  double inflow_p = 0.0;
  std::int64_t next_vehicle_id = 0;
  std::int64_t spawned = 0;
  std::int64_t exited = 0;

  std::size_t vehicle_count() const {
    std::size_t n = 0;
    for (const auto& v : vehicles) n += v.size();
    return n;
  }

  bool operator==(const SimState& o) const {
    return tick == o.tick && vehicles == o.vehicles && signals == o.signals && rng == o.rng &&
           inflow_p == o.inflow_p && next_vehicle_id == o.next_vehicle_id && spawned == o.spawned &&
           exited == o.exited;
  }
};

/// Empty network at tick 0, both signals north-south green.
inline SimState make_state(const ScenarioConfig& cfg, std::uint64_t seed, double inflow_p) {
  if (!(inflow_p >= 0.0 && inflow_p <= 1.0)) {
    throw UsageError("inflow probability must lie in [0, 1], got " + std::to_string(inflow_p));
  }
  SimState s;
  s.lanes = build_lanes(cfg);
  s.vehicles.resize(s.lanes.size());
  for (int i = 0; i < kIntersections; ++i) s.signals[static_cast<std::size_t>(i)].intersection = i;
  s.rng.reseed(seed);
  s.inflow_p = inflow_p;
  return s;
}

/// One Bernoulli(inflow_p) draw per entry lane per tick. A draw is consumed even
/// when the entry is blocked, so the spawn stream does not depend on traffic.
inline void spawn_vehicles(SimState& s, const ScenarioConfig& cfg) {
  const double clear = cfg.min_gap_m + cfg.vehicle_length_m;
  for (int lane : kEntryLanes) {
    const bool draw = s.rng.bernoulli(s.inflow_p);
    auto& q = s.vehicles[static_cast<std::size_t>(lane)];
    const bool free = q.empty() || q.back().position - cfg.vehicle_length_m >= clear;
    if (!draw || !free) continue;
    q.push_back(Vehicle{s.next_vehicle_id++, lane, 0.0, s.lanes[static_cast<std::size_t>(lane)].speed_limit, 0.0});
    ++s.spawned;
  }
}

namespace detail {

/// Largest speed from which the vehicle can still stop within `gap` after
/// travelling for one tick at that speed.
inline double safe_speed(double gap, double b_max, double dt) {
  if (gap == std::numeric_limits<double>::infinity()) return gap;
  const double bd = b_max * dt;
  return -bd + std::sqrt(bd * bd + 2.0 * b_max * gap);
}

}  // namespace detail

/// Advances every vehicle by one tick of `cfg.dt_s` seconds.
///
/// Target speed is min(limit, a_max-bounded acceleration, safe speed toward the
/// nearest obstacle); deceleration is bounded by b_max unless the obstacle
/// would otherwise be overrun, in which case the vehicle stops exactly at it.
/// Obstacles are the leader's rear plus min_gap (possibly on the next lane) and
/// the stop line when the approach is red or yellow.
inline void step_vehicles(SimState& s, const ScenarioConfig& cfg) {
  const double inf = std::numeric_limits<double>::infinity();
  const double dt = cfg.dt_s;
  const double headway = cfg.vehicle_length_m + cfg.min_gap_m;

  for (int lane_id : kUpdateOrder) {
    const Lane& lane = s.lanes[static_cast<std::size_t>(lane_id)];
    auto& queue = s.vehicles[static_cast<std::size_t>(lane_id)];
    if (queue.empty()) continue;

    const bool has_signal = lane.kind != LaneKind::Exit;
    const bool green =
        !has_signal || s.signals[static_cast<std::size_t>(lane.intersection)].allows(lane.approach);

    std::vector<Vehicle> kept;
    kept.reserve(queue.size());
    for (Vehicle v : queue) {
      // Stop point: where the front bumper must halt, either on this lane or
      // (when it lies past the stop line) on the next lane.
      double stop_here = inf;
      double stop_next = inf;
      if (!kept.empty()) {
        stop_here = kept.back().position - headway;
      } else if (!green) {
        stop_here = lane.length;
      } else if (lane.next >= 0) {
        const auto& down = s.vehicles[static_cast<std::size_t>(lane.next)];
        if (!down.empty()) {
          const double p = down.back().position - headway;
          if (p >= 0.0) {
            stop_next = p;
          } else {
            stop_here = lane.length + p;
          }
        }
      }
      const double gap =
          std::max(0.0, stop_here != inf ? stop_here - v.position
                                         : (stop_next != inf ? lane.length - v.position + stop_next : inf));

      double speed = std::min({lane.speed_limit, v.speed + cfg.a_max * dt, detail::safe_speed(gap, cfg.b_max, dt)});
      speed = std::max({speed, v.speed - cfg.b_max * dt, 0.0});

      if (speed * dt >= gap) {
        // Halt exactly at the obstacle.
        v.speed = gap / dt;
        if (stop_here != inf) {
          v.position = std::max(v.position, stop_here);
          kept.push_back(v);
        } else {
          v.position = stop_next;
          v.lane = lane.next;
          s.vehicles[static_cast<std::size_t>(lane.next)].push_back(v);
        }
        continue;
      }

      v.speed = speed;
      const double pos = v.position + speed * dt;
      if (pos <= lane.length) {
        v.position = pos;
        kept.push_back(v);
      } else if (lane.next < 0) {
        ++s.exited;
      } else {
        v.position = std::min(pos - lane.length, stop_next);
        v.lane = lane.next;
        s.vehicles[static_cast<std::size_t>(lane.next)].push_back(v);
      }
    }
    queue = std::move(kept);
  }
}

/// Per vehicle: +1 below the waiting threshold, otherwise -0.4 floored at 0.
inline void update_waiting(SimState& s, const ScenarioConfig& cfg) {
  for (auto& q : s.vehicles) {
    for (auto& v : q) {
      if (v.speed < cfg.wait_speed_threshold_mps) {
        v.wait += 1.0;
      } else {
        v.wait = std::max(0.0, v.wait - 0.4);
      }
    }
  }
}

inline constexpr const char* kDumpHeader = "tick,vehicle_id,lane_id,position,speed,wait";

/// Appends one CSV row per vehicle (lane order, front-most first), full precision.
inline void write_dump_rows(std::ostream& out, const SimState& s) {
  char buf[160];
  for (const auto& q : s.vehicles) {
    for (const auto& v : q) {
      std::snprintf(buf, sizeof buf, "%lld,%lld,%d,%.17g,%.17g,%.17g\n", static_cast<long long>(s.tick),
                    static_cast<long long>(v.id), v.lane, v.position, v.speed, v.wait);
      out << buf;
    }
  }
}

}  // namespace dialtraffic::sim
