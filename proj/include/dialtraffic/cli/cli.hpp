#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dialtraffic/agents/serialize.hpp"
#include "dialtraffic/config.hpp"
#include "dialtraffic/eval/evaluate.hpp"
#include "dialtraffic/train/trainer.hpp"

namespace dialtraffic::cli {

inline std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0') throw UsageError("cannot parse '" + item + "' as a number");
    out.push_back(v);
  }
  return out;
}

/// Observations file: one observation per line, 26 numbers separated by commas
/// or whitespace. Blank lines and lines starting with '#' are skipped.
inline std::vector<env::Observation> read_observations(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read observation file " + path.string());
  std::vector<env::Observation> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream in(line);
    std::vector<double> v;
    double x;
    while (in >> x) v.push_back(x);
    if (v.empty()) continue;
    if (v.size() != env::kObservationSize) {
      throw DimensionError("observation on line " + std::to_string(lineno) + " has " + std::to_string(v.size()) +
                           " values, expected 26");
    }
    env::Observation o{};
    std::copy(v.begin(), v.end(), o.begin());
    out.push_back(o);
  }
  return out;
}

inline sim::ScenarioConfig load_scenario(const std::string& path) {
  KeyValueConfig kv = path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
  kv.apply_env_overrides(sim::ScenarioConfig::keys());
  auto cfg = sim::ScenarioConfig::from(kv);
  kv.require_all_consumed();
  return cfg;
}

inline void write_report(const eval::EvalReport& report, const std::filesystem::path& out) {
  std::ofstream csv(out);
  if (!csv) throw IoError("cannot write " + out.string());
  eval::write_report_csv(csv, report);
  auto json_path = out;
  json_path.replace_extension(".json");
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot write " + json_path.string());
  js << eval::report_to_json(report).dump(2) << '\n';
}

/// Entry point behind the `dialtraffic` executable. Returns the process exit
/// code: 0 on success, 1 on a runtime failure, 2 on a usage error.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Two-intersection traffic-signal control with independent Q-learning and DIAL"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* train_cmd = app.add_subcommand("train", "Train a policy pair from a key=value config");
  train_cmd->add_option("--config", config_path, "training config file")->required();
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  bool quiet = false;
  train_cmd->add_flag("--quiet", quiet, "no per-epoch progress lines");

  struct EvalArgs {
    std::string checkpoint, inflows, out, scenario;
    int episodes = 200;
    std::uint64_t seed = 0;
  };
  EvalArgs ev, ab;
  auto add_eval_flags = [](CLI::App* cmd, EvalArgs& a) {
    cmd->add_option("--checkpoint", a.checkpoint, "checkpoint directory (contains manifest.json)")->required();
    cmd->add_option("--inflows", a.inflows, "comma-separated inflow probabilities (default 0.1,...,1.0)");
    cmd->add_option("--episodes", a.episodes, "episodes per inflow");
    cmd->add_option("--out", a.out, "CSV report path; a .json mirror is written next to it")->required();
    cmd->add_option("--seed", a.seed, "evaluation seed");
    cmd->add_option("--scenario", a.scenario, "scenario config file");
  };
  auto* eval_cmd = app.add_subcommand("evaluate", "Greedy evaluation over fixed inflows");
  add_eval_flags(eval_cmd, ev);
  auto* ablate_cmd = app.add_subcommand("ablate", "Evaluate a DIAL checkpoint with frozen empty-network messages");
  add_eval_flags(ablate_cmd, ab);

  std::string inspect_ckpt, obs_file;
  int inspect_agent = -1;
  auto* inspect_cmd = app.add_subcommand("inspect-message", "Print the messages produced for given observations");
  inspect_cmd->add_option("--checkpoint", inspect_ckpt, "DIAL checkpoint directory")->required();
  inspect_cmd->add_option("--obs-file", obs_file, "observations, 26 values per line")->required();
  inspect_cmd->add_option("--agent", inspect_agent, "sending agent (default: both)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 2;
  }

  try {
    if (*train_cmd) {
      KeyValueConfig kv = KeyValueConfig::load(config_path);
      kv.apply_env_overrides(train::TrainConfig::keys());
      const auto cfg = train::TrainConfig::from(kv);
      const auto result = train::train(cfg, out_dir, [&](const train::EpochMetrics& m) {
        if (!quiet) out << train::metrics_row(m) << '\n';
      });
      out << "trained " << agents::to_string(cfg.method) << " for " << cfg.epochs << " epochs, "
          << result.interactions << " interactions, best epoch " << result.best_epoch << '\n';
      return 0;
    }

    auto run_eval = [&](const EvalArgs& a, bool ablate) {
      const auto policies = agents::load_policies(a.checkpoint);
      eval::EvalOptions opts;
      if (!a.inflows.empty()) opts.inflows = parse_number_list(a.inflows);
      opts.episodes_per_inflow = a.episodes;
      opts.seed = a.seed;
      opts.scenario = load_scenario(a.scenario);
      eval::EvalReport report;
      if (ablate) {
        const auto frozen = eval::freeze_no_comm_message(policies, opts.scenario);
        report = eval::evaluate(policies, opts, &frozen);
      } else {
        report = eval::evaluate(policies, opts);
      }
      write_report(report, a.out);
      for (const auto& s : report.summary) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s inflow=%.3f mean=%.3f std=%.3f\n", report.method.c_str(), s.inflow,
                      s.mean_return, s.std_return);
        out << buf;
      }
      return 0;
    };
    if (*eval_cmd) return run_eval(ev, false);
    if (*ablate_cmd) return run_eval(ab, true);

    if (*inspect_cmd) {
      const auto policies = agents::load_policies(inspect_ckpt);
      if (policies[0].method() != agents::Method::Dial) throw UsageError("inspect-message requires a DIAL checkpoint");
      if (inspect_agent < -1 || inspect_agent >= env::kAgents) throw UsageError("--agent must be 0 or 1");
      const auto observations = read_observations(obs_file);
      out << "agent,row,m0,m1,m2,m3,m4\n";
      for (int a = 0; a < env::kAgents; ++a) {
        if (inspect_agent >= 0 && a != inspect_agent) continue;
        for (std::size_t r = 0; r < observations.size(); ++r) {
          const auto m = policies[static_cast<std::size_t>(a)].compute_message(observations[r]);
          char buf[256];
          std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", a, r, m[0], m[1], m[2], m[3], m[4]);
          out << buf;
        }
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace dialtraffic::cli
