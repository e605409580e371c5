#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialtraffic/agents/serialize.hpp"
#include "dialtraffic/env/environment.hpp"
#include "dialtraffic/train/rollout.hpp"

namespace dialtraffic::eval {

using train::FrozenMessages;

/// {0.1, 0.2, ..., 1.0}
inline std::vector<double> default_inflow_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

struct EvalOptions {
  std::vector<double> inflows = default_inflow_grid();
  int episodes_per_inflow = 200;
  std::uint64_t seed = 0;
  int episode_len = env::kDefaultEpisodeLength;
  sim::ScenarioConfig scenario;
};

struct EpisodeResult {
  double inflow = 0.0;
  int episode = 0;
  double episode_return = 0.0;
};

struct InflowSummary {
  double inflow = 0.0;
  double mean_return = 0.0;
  double std_return = 0.0;  // sample standard deviation (n - 1)
};

struct EvalReport {
  std::string method;  // iql, dial or dial_no_comm
  std::vector<EpisodeResult> episodes;
  std::vector<InflowSummary> summary;
};

/// Messages each DIAL agent sends when it observes an empty network. Used in
/// place of every message for the communication ablation.
inline FrozenMessages freeze_no_comm_message(const agents::PolicyPair& policies, const sim::ScenarioConfig& cfg) {
  if (policies[0].method() != agents::Method::Dial) {
    throw UsageError("ablation requires a DIAL checkpoint");
  }
  FrozenMessages frozen{};
  for (int a = 0; a < env::kAgents; ++a) {
    frozen[static_cast<std::size_t>(a)] =
        policies[static_cast<std::size_t>(a)].compute_message(env::empty_network_observation(cfg, a));
  }
  return frozen;
}

/// Seed of the environment for one (inflow, episode) cell. Independent of the
/// method, so every configuration sees the same vehicle arrivals.
inline std::uint64_t episode_seed(std::uint64_t seed, std::size_t inflow_index, int episode) {
  return derive_seed({seed, 0xe7a1, static_cast<std::uint64_t>(inflow_index), static_cast<std::uint64_t>(episode)});
}

inline std::vector<InflowSummary> summarize(const std::vector<EpisodeResult>& rows) {
  std::vector<InflowSummary> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < rows.size() && rows[j].inflow == rows[i].inflow) sum += rows[j++].episode_return;
    const double n = static_cast<double>(j - i);
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t k = i; k < j; ++k) ss += (rows[k].episode_return - mean) * (rows[k].episode_return - mean);
    out.push_back({rows[i].inflow, mean, n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0});
    i = j;
  }
  return out;
}

/// Greedy rollouts at each fixed inflow. With `frozen` set, every message is
/// replaced by the frozen constants and the report is labelled dial_no_comm.
inline EvalReport evaluate(const agents::PolicyPair& policies, const EvalOptions& opts,
                           const FrozenMessages* frozen = nullptr) {
  if (opts.episodes_per_inflow < 1) throw UsageError("episodes per inflow must be at least 1");
  for (double p : opts.inflows) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("inflow " + std::to_string(p) + " is outside [0, 1]");
  }
  EvalReport report;
  report.method = frozen != nullptr ? "dial_no_comm" : agents::to_string(policies[0].method());
  env::TrafficEnv env(opts.scenario, opts.episode_len);
  std::array<Rng, env::kAgents> rngs{};
  for (std::size_t i = 0; i < opts.inflows.size(); ++i) {
    for (int e = 0; e < opts.episodes_per_inflow; ++e) {
      const auto traj = train::rollout_episode(policies, env, episode_seed(opts.seed, i, e), opts.inflows[i],
                                               train::RolloutMode::Eval, nullptr, rngs, frozen);
      report.episodes.push_back({opts.inflows[i], e, traj.episode_return()});
    }
  }
  report.summary = summarize(report.episodes);
  return report;
}

inline constexpr const char* kReportHeader = "method,inflow,episode,return,mean_return,std_return";

/// One CSV: per-episode rows (method, inflow, episode, return) followed by one
/// summary row per inflow (method, inflow, mean_return, std_return). Columns a
/// row kind does not use are empty; summary rows carry episode "all".
inline void write_report_csv(std::ostream& out, const EvalReport& r) {
  char buf[256];
  out << kReportHeader << '\n';
  for (const auto& e : r.episodes) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%d,%.17g,,\n", r.method.c_str(), e.inflow, e.episode, e.episode_return);
    out << buf;
  }
  for (const auto& s : r.summary) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,all,,%.17g,%.17g\n", r.method.c_str(), s.inflow, s.mean_return,
                  s.std_return);
    out << buf;
  }
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["episodes"] = nlohmann::json::array();
  for (const auto& e : r.episodes) {
    j["episodes"].push_back({{"method", r.method}, {"inflow", e.inflow}, {"episode", e.episode}, {"return", e.episode_return}});
  }
  j["summary"] = nlohmann::json::array();
  for (const auto& s : r.summary) {
    j["summary"].push_back(
        {{"method", r.method}, {"inflow", s.inflow}, {"mean_return", s.mean_return}, {"std_return", s.std_return}});
  }
  return j;
}

}  // namespace dialtraffic::eval
