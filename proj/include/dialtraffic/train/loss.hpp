#pragma once

#include <array>
#include <vector>

#include "dialtraffic/nn/graph.hpp"
#include "dialtraffic/nn/loss.hpp"
#include "dialtraffic/nn/mlp.hpp"
#include "dialtraffic/train/rollout.hpp"

namespace dialtraffic::train {

using Targets = std::array<nn::Matrix, env::kAgents>;

namespace detail {

inline std::size_t total_steps(const std::vector<Trajectory>& trajs) {
  std::size_t n = 0;
  for (const auto& t : trajs) n += t.length();
  return n;
}

/// Stacked observations of one agent, one row per step, episodes in order.
inline nn::Matrix stack_observations(const std::vector<Trajectory>& trajs, int agent) {
  nn::Matrix x(static_cast<Eigen::Index>(total_steps(trajs)), env::kObservationSize);
  Eigen::Index r = 0;
  for (const auto& t : trajs) {
    for (const auto& o : t.observations) {
      for (int i = 0; i < env::kObservationSize; ++i) x(r, i) = o[static_cast<std::size_t>(agent)][static_cast<std::size_t>(i)];
      ++r;
    }
  }
  return x;
}

/// Row index of the previous step in the same episode, -1 at episode starts.
inline std::vector<long> previous_step_rows(const std::vector<Trajectory>& trajs) {
  std::vector<long> idx;
  long base = 0;
  for (const auto& t : trajs) {
    for (std::size_t s = 0; s < t.length(); ++s) idx.push_back(s == 0 ? -1 : base + static_cast<long>(s) - 1);
    base += static_cast<long>(t.length());
  }
  return idx;
}

/// target_t = c*r_t + gamma * max_u q(t+1, u) inside an episode, c*r_t at its
/// last step, with c the reward scale.
inline nn::Matrix targets_from_q(const std::vector<Trajectory>& trajs, const nn::Matrix& q, double gamma,
                                 double reward_scale = 1.0) {
  nn::Matrix y(q.rows(), 1);
  Eigen::Index r = 0;
  for (const auto& t : trajs) {
    for (std::size_t s = 0; s < t.length(); ++s, ++r) {
      y(r, 0) = reward_scale * t.rewards[s];
      if (s + 1 < t.length()) y(r, 0) += gamma * q.row(r + 1).maxCoeff();
    }
  }
  return y;
}

inline std::vector<int> stacked_actions(const std::vector<Trajectory>& trajs, int agent) {
  std::vector<int> a;
  for (const auto& t : trajs)
    for (const auto& act : t.actions) a.push_back(act[static_cast<std::size_t>(agent)]);
  return a;
}

inline void check_trainable(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw UsageError("loss needs at least one trajectory");
  for (const auto& t : trajs) {
    if (t.mode != RolloutMode::Train) throw UsageError("loss needs train-mode trajectories, got an eval rollout");
    if (t.length() == 0) throw UsageError("loss got an empty trajectory");
  }
}

}  // namespace detail

/// Detached TD targets per agent under the current parameters, recomputed from
/// the stored observations (and, for DIAL, the peer's messages from one step
/// earlier).
inline Targets compute_td_targets(const std::vector<Trajectory>& trajs, const PolicyPair& policies, double gamma,
                                  double reward_scale = 1.0) {
  detail::check_trainable(trajs);
  const bool dial = policies[0].method() == agents::Method::Dial;
  std::array<nn::Matrix, env::kAgents> x;
  for (int a = 0; a < env::kAgents; ++a) x[static_cast<std::size_t>(a)] = detail::stack_observations(trajs, a);
  const auto prev = detail::previous_step_rows(trajs);
  Targets out;
  for (int a = 0; a < env::kAgents; ++a) {
    const auto ai = static_cast<std::size_t>(a);
    nn::Matrix input = x[ai];
    if (dial) {
      const nn::Matrix m = nn::linear_forward(x[static_cast<std::size_t>(peer(a))],
                                              policies[static_cast<std::size_t>(peer(a))].comm_net().layers.front());
      nn::Matrix inc = nn::Matrix::Zero(m.rows(), m.cols());
      for (std::size_t r = 0; r < prev.size(); ++r)
        if (prev[r] >= 0) inc.row(static_cast<Eigen::Index>(r)) = m.row(prev[r]);
      input.conservativeResize(Eigen::NoChange, input.cols() + agents::kMessageSize);
      input.rightCols(agents::kMessageSize) = inc;
    }
    out[ai] = detail::targets_from_q(trajs, nn::mlp_forward(input, policies[ai].action_net()), gamma,
                                       reward_scale);
  }
  return out;
}

/// Tracked TD loss for a batch of trajectories.
///
/// Each agent's loss is the mean squared TD error over every step of every
/// trajectory. For DIAL, agent b's network input at step t contains the
/// message computed on the graph from agent a's observation at t - 1, so
/// backward() on `total` (or on one agent's term) reaches the sender's
/// communication weights. Targets are constants.
struct EpochLoss {
  nn::Graph graph;
  std::array<nn::Var, env::kAgents> agent_loss{};
  std::array<nn::Var, env::kAgents> q{};
  std::array<nn::Var, env::kAgents> messages{};
  nn::Var total{};
  Targets targets;

  double value() const { return graph.value(total)(0, 0); }
  double agent_value(int a) const { return graph.value(agent_loss[static_cast<std::size_t>(a)])(0, 0); }
};

/// Builds the loss over `trajs`. With `fixed_targets` the given targets are used
/// instead of bootstrapping from the current Q-values.
inline EpochLoss compute_dial_loss(const std::vector<Trajectory>& trajs, PolicyPair& policies, double gamma,
                                   const Targets* fixed_targets = nullptr, double reward_scale = 1.0) {
  detail::check_trainable(trajs);
  const bool dial = policies[0].method() == agents::Method::Dial;
  EpochLoss L;
  auto& g = L.graph;
  std::array<nn::Var, env::kAgents> obs;
  for (int a = 0; a < env::kAgents; ++a) obs[static_cast<std::size_t>(a)] = g.constant(detail::stack_observations(trajs, a));

  std::array<nn::Var, env::kAgents> input = obs;
  if (dial) {
    const auto prev = detail::previous_step_rows(trajs);
    for (int a = 0; a < env::kAgents; ++a) {
      const auto ai = static_cast<std::size_t>(a);
      L.messages[ai] = nn::linear_forward(g, obs[ai], policies[ai].comm_net().layers.front());
    }
    for (int b = 0; b < env::kAgents; ++b) {
      const auto bi = static_cast<std::size_t>(b);
      const nn::Var incoming = g.gather_rows(L.messages[static_cast<std::size_t>(peer(b))], prev);
      input[bi] = g.concat_cols(obs[bi], incoming);
    }
  }

  for (int a = 0; a < env::kAgents; ++a) {
    const auto ai = static_cast<std::size_t>(a);
    L.q[ai] = nn::mlp_forward(g, input[ai], policies[ai].action_net());
    L.targets[ai] = fixed_targets != nullptr ? (*fixed_targets)[ai] : detail::targets_from_q(trajs, g.value(L.q[ai]), gamma, reward_scale);
    const nn::Var taken = g.pick(L.q[ai], detail::stacked_actions(trajs, a));
    L.agent_loss[ai] = nn::td_loss(g, taken, L.targets[ai]);
  }
  L.total = g.add(L.agent_loss[0], L.agent_loss[1]);
  return L;
}

}  // namespace dialtraffic::train
