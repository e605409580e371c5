#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "dialtraffic/agents/policy.hpp"
#include "dialtraffic/nn/checkpoint.hpp"

namespace dialtraffic::agents {

using PolicyPair = std::array<AgentPolicy, env::kAgents>;

inline constexpr const char* kManifestName = "manifest.json";

/// Writes one checkpoint document per network plus a manifest listing agent
/// ids and network roles.
inline void save_policies(const PolicyPair& policies, const std::filesystem::path& dir,
                          const nlohmann::json& extra = nlohmann::json::object()) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  nlohmann::json manifest;
  manifest["version"] = nn::kCheckpointVersion;
  manifest["method"] = to_string(policies[0].method());
  manifest["agents"] = nlohmann::json::array();
  for (const auto& p : policies) {
    const std::string stem = "agent" + std::to_string(p.agent_id());
    nn::save_checkpoint(p.action_net(), dir / (stem + "_action.json"));
    manifest["agents"].push_back({{"id", p.agent_id()}, {"role", "action"}, {"file", stem + "_action.json"}});
    if (p.has_comm()) {
      nn::save_checkpoint(p.comm_net(), dir / (stem + "_comm.json"));
      manifest["agents"].push_back({{"id", p.agent_id()}, {"role", "comm"}, {"file", stem + "_comm.json"}});
    }
  }
  if (!extra.empty()) manifest["info"] = extra;
  std::ofstream f(dir / kManifestName);
  if (!f) throw IoError("cannot write manifest in " + dir.string());
  f << manifest.dump(2) << '\n';
}

inline PolicyPair load_policies(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestName;
  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot read checkpoint manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    f >> manifest;
    const Method method = parse_method(manifest.at("method").get<std::string>());
    std::array<std::optional<nn::NetworkParams>, env::kAgents> action, comm;
    for (const auto& entry : manifest.at("agents")) {
      const int id = entry.at("id").get<int>();
      if (id < 0 || id >= env::kAgents) throw UsageError("manifest lists unknown agent id " + std::to_string(id));
      const std::string role = entry.at("role").get<std::string>();
      auto params = nn::load_checkpoint(dir / entry.at("file").get<std::string>());
      if (role == "action") {
        action[static_cast<std::size_t>(id)] = std::move(params);
      } else if (role == "comm") {
        comm[static_cast<std::size_t>(id)] = std::move(params);
      } else {
        throw UsageError("manifest lists unknown role '" + role + "'");
      }
    }
    PolicyPair out;
    for (int i = 0; i < env::kAgents; ++i) {
      auto& a = action[static_cast<std::size_t>(i)];
      if (!a) throw UsageError("manifest has no action network for agent " + std::to_string(i));
      out[static_cast<std::size_t>(i)] =
          AgentPolicy::from_networks(i, method, std::move(*a), std::move(comm[static_cast<std::size_t>(i)]));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
}

}  // namespace dialtraffic::agents
