#include <gtest/gtest.h>

#include <sstream>

#include "dialtraffic/env/environment.hpp"
#include "oracles.hpp"

using namespace dialtraffic;
using namespace dialtraffic::env;

namespace {

const sim::ScenarioConfig kCfg{};

Observation expected_empty(int agent) {
  Observation o{};
  for (int k = 0; k < 4; ++k) {
    o[static_cast<std::size_t>(4 + k)] = 1.0;
    o[static_cast<std::size_t>(8 + k)] = (agent * 4 + k) / 14.0;
  }
  return o;
}

/// Random state with vehicles only on approach lanes, consistent ordering and gaps.
sim::SimState random_state(Rng& rng) {
  auto s = sim::make_state(kCfg, rng.next_u64(), 0.0);
  for (int lane = 0; lane < 8; ++lane) {
    double pos = kCfg.lane_length_m - rng.uniform(0.0, 30.0);
    const int n = static_cast<int>(rng.below(6));
    for (int i = 0; i < n && pos >= 0.0; ++i) {
      const double speed = rng.bernoulli(0.5) ? 0.0 : rng.uniform(0.0, kCfg.speed_limit_mps);
      const double wait = rng.bernoulli(0.3) ? 0.0 : std::floor(rng.uniform(0.0, 150.0)) + 0.2 * rng.below(5);
      s.vehicles[static_cast<std::size_t>(lane)].push_back(
          sim::Vehicle{s.next_vehicle_id++, lane, pos, speed, wait});
      pos -= 7.0 + rng.uniform(0.0, 20.0);
    }
  }
  for (auto& sig : s.signals) {
    sig.phase = rng.bernoulli(0.5) ? sim::Phase::EastWest : sim::Phase::NorthSouth;
    if (rng.bernoulli(0.3)) sim::apply_signal_action(sig, sim::SignalAction::Switch, kCfg.yellow_ticks);
  }
  return s;
}

}  // namespace

TEST(BuildObservation, EmptyNetworkSentinel) {
  const auto s = sim::make_state(kCfg, 0, 0.0);
  EXPECT_EQ(build_observation(s, kCfg, 0), expected_empty(0));
  EXPECT_EQ(build_observation(s, kCfg, 1), expected_empty(1));
}

TEST(BuildObservation, DirectionAndYellowSlots) {
  auto s = sim::make_state(kCfg, 0, 0.0);
  sim::apply_signal_action(s.signals[0], sim::SignalAction::Switch, 3);
  auto o = build_observation(s, kCfg, 0);
  EXPECT_EQ(o[24], 0.0);
  EXPECT_EQ(o[25], 1.0);
  for (int i = 0; i < 3; ++i) sim::advance_signal(s.signals[0]);
  o = build_observation(s, kCfg, 0);
  EXPECT_EQ(o[24], 1.0);
  EXPECT_EQ(o[25], 0.0);
}

TEST(BuildObservation, SingleVehicleTouchesOnlyItsLaneSlots) {
  auto s = sim::make_state(kCfg, 0, 0.0);
  s.vehicles[2].push_back(sim::Vehicle{0, 2, 90.0, 5.0, 4.0});
  const auto o = build_observation(s, kCfg, 0);
  const auto empty = expected_empty(0);
  for (int i = 0; i < kObservationSize; ++i) {
    const bool lane2_slot = i == 2 || i == 6 || i == 14 || i == 22;
    if (lane2_slot) {
      EXPECT_NE(o[static_cast<std::size_t>(i)], empty[static_cast<std::size_t>(i)]) << i;
    } else {
      EXPECT_EQ(o[static_cast<std::size_t>(i)], empty[static_cast<std::size_t>(i)]) << i;
    }
  }
  // 5 m/s is above the waiting threshold, so slot 18 stays 0; slot 10 is the
  // lane's edge number.
  EXPECT_EQ(o[18], 0.0);
  EXPECT_EQ(o[10], 2.0 / 14.0);

  std::ostringstream dump;
  sim::write_dump_rows(dump, s);
  EXPECT_EQ(o, oracle::observation(oracle::parse_dump(dump.str()), 0, 0, 0));
  EXPECT_DOUBLE_EQ(o[2], 5.0 / 13.9);
  EXPECT_DOUBLE_EQ(o[6], 0.1);
  EXPECT_DOUBLE_EQ(o[14], 7.0 / 100.0);
  EXPECT_DOUBLE_EQ(o[22], 4.0 / 200.0);
}

TEST(BuildObservation, RandomStatesMatchDumpOracleAndStayInUnitRange) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_state(rng);
    std::ostringstream dump;
    sim::write_dump_rows(dump, s);
    const auto rows = oracle::parse_dump(dump.str());
    for (int a = 0; a < kAgents; ++a) {
      const auto& sig = s.signals[static_cast<std::size_t>(a)];
      const auto o = build_observation(s, kCfg, a);
      EXPECT_EQ(o, oracle::observation(rows, a, sig.phase == sim::Phase::EastWest, sig.yellow()));
      for (double v : o) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(ComputeReward, EmptyAndAverage) {
  auto s = sim::make_state(kCfg, 0, 0.0);
  EXPECT_EQ(compute_reward(s), 0.0);
  s.vehicles[0].push_back(sim::Vehicle{0, 0, 50, 0, 4.0});
  s.vehicles[9].push_back(sim::Vehicle{1, 9, 50, 10, 6.0});
  EXPECT_EQ(compute_reward(s), -5.0);
}

TEST(ComputeReward, ThreeSlowTicksThenTwoFast) {
  auto s = sim::make_state(kCfg, 0, 0.0);
  s.vehicles[13].push_back(sim::Vehicle{0, 13, 0, 0.0, 0.0});
  for (int i = 0; i < 3; ++i) sim::update_waiting(s, kCfg);
  s.vehicles[13][0].speed = 5.0;
  for (int i = 0; i < 2; ++i) sim::update_waiting(s, kCfg);
  EXPECT_NEAR(compute_reward(s), -2.2, 1e-12);
}

TEST(ComputeReward, RecoverableFromBothAgentsRawAggregates) {
  // With traffic only on approach lanes the two agents' raw counts and waiting
  // sums determine the team reward.
  Rng rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_state(rng);
    double sum = 0.0, count = 0.0;
    for (int a = 0; a < kAgents; ++a) {
      const auto raw = raw_observation(s, kCfg, a);
      for (int k = 0; k < 4; ++k) {
        count += raw[static_cast<std::size_t>(slot::kCount + k)];
        sum += raw[static_cast<std::size_t>(slot::kWaitSum + k)];
      }
    }
    const double from_obs = count == 0 ? 0.0 : -sum / count;
    EXPECT_NEAR(compute_reward(s), from_obs, 1e-9);
    EXPECT_LE(compute_reward(s), 0.0);
  }
}

TEST(TrafficEnv, ResetIsDeterministicAndEmpty) {
  TrafficEnv env(kCfg);
  const auto a = env.reset(1, 0.3);
  const auto b = env.reset(1, 0.3);
  const auto c = env.reset(99, 0.3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_EQ(a[0], expected_empty(0));
  EXPECT_EQ(a[1], expected_empty(1));
  EXPECT_EQ(env.state().signals[0].phase, sim::Phase::NorthSouth);
  EXPECT_EQ(env.state().tick, 0);
}

TEST(TrafficEnv, TwoHundredStepsThenUsageError) {
  TrafficEnv env(kCfg);
  env.reset(3, 0.4);
  for (int t = 0; t < 200; ++t) {
    const auto step = env.step({t % 7 == 0, 0});
    EXPECT_EQ(step.rewards[0], step.rewards[1]);
    EXPECT_LE(step.rewards[0], 0.0);
    EXPECT_EQ(step.done, t == 199);
  }
  EXPECT_THROW(env.step({0, 0}), UsageError);
}

TEST(TrafficEnv, NoInflowMeansZeroReward) {
  TrafficEnv env(kCfg);
  env.reset(4, 0.0);
  while (!env.done()) EXPECT_EQ(env.step({0, 0}).rewards[0], 0.0);
}

TEST(TrafficEnv, RejectsBadActionsAndConfig) {
  TrafficEnv env(kCfg);
  env.reset(0, 0.1);
  EXPECT_THROW(env.step({2, 0}), UsageError);
  sim::ScenarioConfig bad;
  bad.lane_length_m = 0.0;
  try {
    TrafficEnv broken(bad);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "lane_length_m");
  }
}

TEST(TrafficEnv, DumpRewardsMatchWaitingRuleOracle) {
  TrafficEnv env(kCfg);
  std::ostringstream dump;
  env.set_dump(&dump);
  env.reset(5, 0.5);
  Rng policy(6);
  std::vector<double> rewards;
  while (!env.done()) rewards.push_back(env.step({policy.bernoulli(0.2), policy.bernoulli(0.2)}).rewards[0]);
  const auto ticks = oracle::by_tick(oracle::parse_dump(dump.str()));
  oracle::RewardOracle ro;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    auto it = ticks.find(static_cast<long long>(t + 1));
    const double expect = ro.tick(it == ticks.end() ? std::vector<oracle::DumpRow>{} : it->second);
    ASSERT_EQ(rewards[t], expect) << "tick " << t + 1;
  }
}
