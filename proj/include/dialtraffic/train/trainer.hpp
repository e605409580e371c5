#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialtraffic/agents/serialize.hpp"
#include "dialtraffic/nn/adam.hpp"
#include "dialtraffic/train/config.hpp"
#include "dialtraffic/train/loss.hpp"
#include "dialtraffic/train/rollout.hpp"

namespace dialtraffic::train {

struct EpochMetrics {
  std::int64_t epoch = 0;
  double mean_return = 0.0;  // mean over the epoch's episodes of the summed shared reward
  double epsilon = 0.0;
  double loss = 0.0;
  double seconds = 0.0;
};

inline constexpr const char* kMetricsHeader = "epoch,mean_return,epsilon,loss,seconds";

inline std::string metrics_row(const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.6f", static_cast<long long>(m.epoch), m.mean_return,
                m.epsilon, m.loss, m.seconds);
  return buf;
}

/// Owns both policies, their exploration schedules and the RNG streams of one
/// training run. All randomness is derived from the config seed.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg) : cfg_(std::move(cfg)), env_(cfg_.scenario, cfg_.episode_len) {
    cfg_.validate();
    Rng init(derive_seed({cfg_.seed, 0}));
    for (int a = 0; a < env::kAgents; ++a) {
      policies_[static_cast<std::size_t>(a)] = agents::AgentPolicy::create(a, cfg_.method, init, cfg_.hidden);
      eps_[static_cast<std::size_t>(a)] = agents::EpsilonState{cfg_.eps_start, cfg_.eps_decay, cfg_.eps_min};
      action_rngs_[static_cast<std::size_t>(a)].reseed(derive_seed({cfg_.seed, 2, static_cast<std::uint64_t>(a)}));
    }
    inflow_rng_.reseed(derive_seed({cfg_.seed, 1}));
  }

  /// Rolls out one epoch of episodes, forms the summed per-agent TD loss and
  /// applies one Adam step to every network.
  EpochMetrics train_epoch() {
    const auto start = std::chrono::steady_clock::now();
    const std::int64_t epoch = epoch_ + 1;
    last_.clear();
    for (int e = 0; e < cfg_.episodes_per_epoch; ++e) {
      const double inflow = inflow_rng_.uniform(cfg_.inflow_min, cfg_.inflow_max);
      const auto seed = derive_seed({cfg_.seed, 3, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(e)});
      last_.push_back(rollout_episode(policies_, env_, seed, inflow, RolloutMode::Train, &eps_, action_rngs_));
      interactions_ += static_cast<std::int64_t>(last_.back().length());
    }

    EpochLoss loss = compute_dial_loss(last_, policies_, cfg_.gamma, nullptr, cfg_.reward_scale);
    const double loss_value = loss.value();
    if (!std::isfinite(loss_value)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": loss is " +
                         std::to_string(loss_value));
    }
    loss.graph.backward(loss.total);
    for (auto& p : policies_) {
      nn::adam_step(p.action_net(), cfg_.lr);
      if (p.has_comm()) nn::adam_step(p.comm_net(), cfg_.lr);
    }

    epoch_ = epoch;
    EpochMetrics m;
    m.epoch = epoch;
    double total = 0.0;
    for (const auto& t : last_) total += t.episode_return();
    m.mean_return = total / static_cast<double>(last_.size());
    m.epsilon = eps_[0].value();
    m.loss = loss_value;
    m.seconds = cfg_.wall_clock
                    ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
                    : 0.0;
    return m;
  }

  const TrainConfig& config() const { return cfg_; }
  PolicyPair& policies() { return policies_; }
  const PolicyPair& policies() const { return policies_; }
  const std::array<agents::EpsilonState, env::kAgents>& epsilon() const { return eps_; }
  std::int64_t epoch() const { return epoch_; }
  std::int64_t interactions() const { return interactions_; }
  /// Trajectories of the most recent epoch.
  const std::vector<Trajectory>& last_trajectories() const { return last_; }

 private:
  TrainConfig cfg_;
  env::TrafficEnv env_;
  PolicyPair policies_;
  std::array<agents::EpsilonState, env::kAgents> eps_{};
  std::array<Rng, env::kAgents> action_rngs_{};
  Rng inflow_rng_;
  std::int64_t epoch_ = 0;
  std::int64_t interactions_ = 0;
  std::vector<Trajectory> last_;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  std::int64_t interactions = 0;
  std::int64_t best_epoch = 0;
  double best_mean_return = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline void ensure_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f || !(f << "ok")) throw IoError("output directory " + dir.string() + " is not writable");
  }
  std::filesystem::remove(probe, ec);
}

}  // namespace detail

/// Full training run. Writes into `out`:
///   metrics.csv              one row per epoch
///   metrics.json             same rows as JSON
///   initial/                 policies before any update
///   checkpoints/epoch_N/     every checkpoint_every epochs
///   best/                    highest mean-return epoch so far
///   final/                   policies after the last epoch
///   summary.json             interaction count, best epoch
/// `on_epoch` is called after each epoch (progress reporting).
inline TrainResult train(const TrainConfig& cfg, const std::filesystem::path& out,
                         const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  detail::ensure_writable(out);
  Trainer trainer(cfg);
  const nlohmann::json info{{"method", agents::to_string(cfg.method)}, {"seed", cfg.seed}};
  agents::save_policies(trainer.policies(), out / "initial", info);

  std::ofstream csv(out / "metrics.csv");
  if (!csv) throw IoError("cannot write " + (out / "metrics.csv").string());
  csv << kMetricsHeader << '\n';

  TrainResult result;
  for (std::int64_t e = 0; e < cfg.epochs; ++e) {
    const auto m = trainer.train_epoch();
    result.metrics.push_back(m);
    csv << metrics_row(m) << '\n';
    csv.flush();
    auto epoch_info = info;
    epoch_info["epoch"] = m.epoch;
    if (m.mean_return > result.best_mean_return) {
      result.best_mean_return = m.mean_return;
      result.best_epoch = m.epoch;
      epoch_info["mean_return"] = m.mean_return;
      agents::save_policies(trainer.policies(), out / "best", epoch_info);
    }
    if (m.epoch % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%06lld", static_cast<long long>(m.epoch));
      agents::save_policies(trainer.policies(), out / "checkpoints" / name, epoch_info);
    }
    if (on_epoch) on_epoch(m);
  }
  if (cfg.epochs > 0) {
    auto final_info = info;
    final_info["epoch"] = trainer.epoch();
    agents::save_policies(trainer.policies(), out / "final", final_info);
  }
  result.interactions = trainer.interactions();

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& m : result.metrics)
    rows.push_back({{"epoch", m.epoch}, {"mean_return", m.mean_return}, {"epsilon", m.epsilon}, {"loss", m.loss},
                    {"seconds", m.seconds}});
  std::ofstream mj(out / "metrics.json");
  mj << rows.dump(1) << '\n';
  if (!mj) throw IoError("cannot write " + (out / "metrics.json").string());

  nlohmann::json summary{{"method", agents::to_string(cfg.method)},
                         {"seed", cfg.seed},
                         {"epochs", cfg.epochs},
                         {"interactions", result.interactions},
                         {"best_epoch", result.best_epoch}};
  if (result.best_epoch > 0) summary["best_mean_return"] = result.best_mean_return;
  std::ofstream sf(out / "summary.json");
  sf << summary.dump(2) << '\n';
  if (!sf) throw IoError("cannot write " + (out / "summary.json").string());
  return result;
}

}  // namespace dialtraffic::train
