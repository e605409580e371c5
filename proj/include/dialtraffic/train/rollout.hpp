#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "dialtraffic/agents/policy.hpp"
#include "dialtraffic/agents/serialize.hpp"
#include "dialtraffic/env/environment.hpp"
#include "dialtraffic/rng.hpp"

namespace dialtraffic::train {

enum class RolloutMode { Train, Eval };

using agents::Message;
using agents::PolicyPair;
using agents::QValues;
using env::Observation;

/// Per-agent message overriding what each agent would send. Agent b receives
/// frozen[a] from agent a; compute_message is never called.
using FrozenMessages = std::array<Message, env::kAgents>;

/// One episode. Entry t of every per-step vector belongs to step t.
///
/// For DIAL the message an agent receives at step t is the one its peer sent at
/// t - 1; step 0 receives the zero message. The tracked graph through that
/// channel is rebuilt from these records in one batched pass when the epoch
/// loss is formed (see loss.hpp), so the rollout itself only stores values.
struct Trajectory {
  RolloutMode mode = RolloutMode::Train;
  double inflow_p = 0.0;
  std::uint64_t env_seed = 0;
  std::vector<std::array<Observation, env::kAgents>> observations;
  std::vector<std::array<Message, env::kAgents>> sent;
  std::vector<std::array<Message, env::kAgents>> received;
  std::vector<std::array<int, env::kAgents>> actions;
  std::vector<double> rewards;
  std::vector<std::array<QValues, env::kAgents>> q_values;

  std::size_t length() const { return rewards.size(); }

  double episode_return() const {
    double r = 0.0;
    for (double x : rewards) r += x;
    return r;
  }
};

inline constexpr int peer(int agent) { return 1 - agent; }

/// Runs one full episode. In Train mode actions are epsilon-greedy with the
/// given per-agent schedules, which decay once per interaction; in Eval mode
/// actions are greedy and `eps` is ignored.
inline Trajectory rollout_episode(const PolicyPair& policies, env::TrafficEnv& env, std::uint64_t env_seed,
                                  double inflow_p, RolloutMode mode,
                                  std::array<agents::EpsilonState, env::kAgents>* eps,
                                  std::array<Rng, env::kAgents>& action_rngs,
                                  const FrozenMessages* frozen = nullptr) {
  if (mode == RolloutMode::Train && eps == nullptr) throw UsageError("training rollouts need epsilon schedules");
  const bool dial = policies[0].method() == agents::Method::Dial;
  if (frozen != nullptr && !dial) throw UsageError("frozen messages require DIAL policies");

  Trajectory traj;
  traj.mode = mode;
  traj.inflow_p = inflow_p;
  traj.env_seed = env_seed;
  const auto len = static_cast<std::size_t>(env.episode_length());
  traj.observations.reserve(len);
  traj.actions.reserve(len);
  traj.rewards.reserve(len);
  traj.q_values.reserve(len);
  if (dial) {
    traj.sent.reserve(len);
    traj.received.reserve(len);
  }

  auto obs = env.reset(env_seed, inflow_p);
  std::array<Message, env::kAgents> incoming{agents::kZeroMessage, agents::kZeroMessage};
  if (frozen != nullptr) incoming = {(*frozen)[1], (*frozen)[0]};
  while (!env.done()) {
    std::array<Message, env::kAgents> outgoing{};
    std::array<QValues, env::kAgents> q{};
    std::array<int, env::kAgents> act{};
    for (int a = 0; a < env::kAgents; ++a) {
      const auto ai = static_cast<std::size_t>(a);
      const auto& pol = policies[ai];
      if (dial) {
        outgoing[ai] = frozen != nullptr ? (*frozen)[ai] : pol.compute_message(obs[ai]);
        q[ai] = pol.q_forward(obs[ai], &incoming[ai]);
      } else {
        q[ai] = pol.q_forward(obs[ai]);
      }
      const double e = mode == RolloutMode::Train ? (*eps)[ai].value() : 0.0;
      act[ai] = agents::select_action(q[ai], e, action_rngs[ai]);
      if (mode == RolloutMode::Train) (*eps)[ai] = agents::decay_epsilon((*eps)[ai]);
    }
    traj.observations.push_back(obs);
    traj.actions.push_back(act);
    traj.q_values.push_back(q);
    if (dial) {
      traj.sent.push_back(outgoing);
      traj.received.push_back(incoming);
    }
    const auto step = env.step(act);
    traj.rewards.push_back(step.rewards[0]);
    obs = step.observations;
    if (dial) {
      for (int a = 0; a < env::kAgents; ++a) {
        incoming[static_cast<std::size_t>(a)] = outgoing[static_cast<std::size_t>(peer(a))];
      }
    }
  }
  return traj;
}

}  // namespace dialtraffic::train
