#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialtraffic/errors.hpp"
#include "dialtraffic/nn/mlp.hpp"

namespace dialtraffic::nn {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json flatten(const Matrix& m) {
  // Row-major storage makes data() already in row-major order.
  return nlohmann::json(std::vector<double>(m.data(), m.data() + m.size()));
}

inline Matrix unflatten(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
    throw DimensionError(std::string("checkpoint: ") + what + " has " + std::to_string(v.size()) +
                         " values, expected " + shape_string(rows, cols));
  }
  Matrix m(rows, cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

}  // namespace detail

/// Serialises parameters and Adam state. Doubles are written in shortest
/// round-trip form, so load(save(p)) reproduces every value exactly.
inline nlohmann::json to_checkpoint(const NetworkParams& p) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["layer_shapes"] = nlohmann::json::array();
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  j["adam_m"] = nlohmann::json::array();
  j["adam_v"] = nlohmann::json::array();
  for (const auto& l : p.layers) {
    j["layer_shapes"].push_back({l.out_width(), l.in_width()});
    j["weights"].push_back(detail::flatten(l.weight.value));
    j["biases"].push_back(detail::flatten(l.bias.value));
    j["adam_m"].push_back({{"weight", detail::flatten(l.weight_m)}, {"bias", detail::flatten(l.bias_m)}});
    j["adam_v"].push_back({{"weight", detail::flatten(l.weight_v)}, {"bias", detail::flatten(l.bias_v)}});
  }
  j["t"] = p.step;
  return j;
}

inline NetworkParams from_checkpoint(const nlohmann::json& j) {
  try {
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw UsageError("checkpoint version " + std::to_string(version) + " is not supported");
    }
    NetworkParams p;
    const auto& shapes = j.at("layer_shapes");
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const auto out = shapes[i].at(0).get<Eigen::Index>();
      const auto in = shapes[i].at(1).get<Eigen::Index>();
      DenseLayer l(in, out);
      l.weight.value = detail::unflatten(j.at("weights").at(i), out, in, "weights");
      l.bias.value = detail::unflatten(j.at("biases").at(i), 1, out, "biases");
      l.weight_m = detail::unflatten(j.at("adam_m").at(i).at("weight"), out, in, "adam_m");
      l.bias_m = detail::unflatten(j.at("adam_m").at(i).at("bias"), 1, out, "adam_m");
      l.weight_v = detail::unflatten(j.at("adam_v").at(i).at("weight"), out, in, "adam_v");
      l.bias_v = detail::unflatten(j.at("adam_v").at(i).at("bias"), 1, out, "adam_v");
      p.layers.push_back(std::move(l));
    }
    p.step = j.at("t").get<std::uint64_t>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const NetworkParams& p, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f << to_checkpoint(p).dump() << '\n';
  if (!f) throw IoError("failed writing checkpoint " + path.string());
}

inline NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read checkpoint " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return from_checkpoint(j);
}

}  // namespace dialtraffic::nn
