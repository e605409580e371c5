#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dialtraffic/env/environment.hpp"
#include "dialtraffic/errors.hpp"
#include "dialtraffic/nn/mlp.hpp"
#include "dialtraffic/rng.hpp"

namespace dialtraffic::agents {

enum class Method { Iql, Dial };

inline std::string to_string(Method m) { return m == Method::Iql ? "iql" : "dial"; }

inline Method parse_method(const std::string& s) {
  if (s == "iql") return Method::Iql;
  if (s == "dial") return Method::Dial;
  throw ConfigError("method", "expected 'iql' or 'dial', got '" + s + "'");
}

inline constexpr int kMessageSize = 5;
inline constexpr int kActions = 2;
inline constexpr std::size_t kDefaultHidden = 256;

using Message = std::array<double, kMessageSize>;
using QValues = std::array<double, kActions>;

inline constexpr Message kZeroMessage{};

/// Action network plus, for DIAL, a separate linear communication network.
/// The two networks never share parameters.
class AgentPolicy {
 public:
  AgentPolicy() = default;

  /// Randomly initialised policy. `hidden` lists the hidden-layer widths of
  /// the action network.
  static AgentPolicy create(int agent_id, Method method, Rng& rng,
                            const std::vector<std::size_t>& hidden = {kDefaultHidden, kDefaultHidden}) {
    AgentPolicy p;
    p.agent_id_ = agent_id;
    p.method_ = method;
    p.action_net_ = nn::NetworkParams::uniform(action_widths(method, hidden), rng);
    if (method == Method::Dial) {
      const std::array<std::size_t, 2> comm{env::kObservationSize, kMessageSize};
      p.comm_net_ = nn::NetworkParams::uniform(comm, rng);
    }
    return p;
  }

  static AgentPolicy from_networks(int agent_id, Method method, nn::NetworkParams action,
                                   std::optional<nn::NetworkParams> comm) {
    AgentPolicy p;
    p.agent_id_ = agent_id;
    p.method_ = method;
    p.action_net_ = std::move(action);
    p.comm_net_ = std::move(comm);
    p.validate();
    return p;
  }

  static std::vector<std::size_t> action_widths(Method method, const std::vector<std::size_t>& hidden) {
    std::vector<std::size_t> w{input_width(method)};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(kActions);
    return w;
  }

  static std::size_t input_width(Method m) {
    return env::kObservationSize + (m == Method::Dial ? kMessageSize : 0);
  }

  void validate() const {
    action_net_.validate();
    if (static_cast<std::size_t>(action_net_.input_width()) != input_width(method_) ||
        action_net_.output_width() != kActions) {
      throw DimensionError("action network of agent " + std::to_string(agent_id_) + " has the wrong shape for " +
                           to_string(method_));
    }
    if ((method_ == Method::Dial) != comm_net_.has_value()) {
      throw UsageError("DIAL agents need exactly one communication network, IQL agents none");
    }
    if (comm_net_) {
      comm_net_->validate();
      if (comm_net_->layers.size() != 1 || comm_net_->input_width() != env::kObservationSize ||
          comm_net_->output_width() != kMessageSize) {
        throw DimensionError("communication network must be a single 26 -> 5 linear layer");
      }
    }
  }

  /// Network input row: observation, then the incoming message for DIAL.
  nn::Matrix input_row(const env::Observation& obs, const Message* incoming) const {
    if (method_ == Method::Iql && incoming != nullptr) throw UsageError("IQL agents do not receive messages");
    if (method_ == Method::Dial && incoming == nullptr) throw UsageError("DIAL agents need an incoming message");
    nn::Matrix x(1, static_cast<Eigen::Index>(input_width(method_)));
    for (int i = 0; i < env::kObservationSize; ++i) x(0, i) = obs[static_cast<std::size_t>(i)];
    if (incoming != nullptr) {
      for (int i = 0; i < kMessageSize; ++i) x(0, env::kObservationSize + i) = (*incoming)[static_cast<std::size_t>(i)];
    }
    return x;
  }

  QValues q_forward(const env::Observation& obs, const Message* incoming = nullptr) const {
    const nn::Matrix q = nn::mlp_forward(input_row(obs, incoming), action_net_);
    return {q(0, 0), q(0, 1)};
  }

  /// Linear message m = W·obs + b.
  Message compute_message(const env::Observation& obs) const {
    if (!comm_net_) throw UsageError("compute_message called on an IQL agent");
    ++message_calls_;
    nn::Matrix x(1, env::kObservationSize);
    for (int i = 0; i < env::kObservationSize; ++i) x(0, i) = obs[static_cast<std::size_t>(i)];
    const nn::Matrix m = nn::linear_forward(x, comm_net_->layers.front());
    Message out{};
    for (int i = 0; i < kMessageSize; ++i) out[static_cast<std::size_t>(i)] = m(0, i);
    return out;
  }

  int agent_id() const { return agent_id_; }
  Method method() const { return method_; }
  nn::NetworkParams& action_net() { return action_net_; }
  const nn::NetworkParams& action_net() const { return action_net_; }
  bool has_comm() const { return comm_net_.has_value(); }
  nn::NetworkParams& comm_net() {
    if (!comm_net_) throw UsageError("IQL agents have no communication network");
    return *comm_net_;
  }
  const nn::NetworkParams& comm_net() const {
    if (!comm_net_) throw UsageError("IQL agents have no communication network");
    return *comm_net_;
  }

  /// Number of compute_message calls so far; lets tests confirm a frozen
  /// message really bypasses the communication network.
  std::size_t message_calls() const { return message_calls_; }

 private:
  int agent_id_ = 0;
  Method method_ = Method::Iql;
  nn::NetworkParams action_net_;
  std::optional<nn::NetworkParams> comm_net_;
  mutable std::size_t message_calls_ = 0;
};

/// Exploration rate after `steps` interactions: max(floor, start * decay^steps).
/// Evaluated in closed form so long schedules carry no accumulated rounding.
struct EpsilonState {
  double start = 1.0;
  double decay = 0.99995;
  double floor = 0.05;
  std::int64_t steps = 0;

  double value() const { return std::max(floor, start * std::pow(decay, static_cast<double>(steps))); }
};

inline EpsilonState decay_epsilon(EpsilonState e) {
  ++e.steps;
  return e;
}

/// Greedy over `q` with probability 1 - epsilon, uniform otherwise. Ties go to
/// action 0. Always consumes exactly one or two draws: one for the explore
/// test and one more when exploring.
inline int select_action(const QValues& q, double epsilon, Rng& rng) {
  for (double v : q) {
    if (std::isnan(v)) throw NumericError("select_action: Q-value is NaN");
  }
  if (rng.uniform() < epsilon) return static_cast<int>(rng.below(kActions));
  return q[1] > q[0] ? 1 : 0;
}

}  // namespace dialtraffic::agents
