#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dialtraffic/errors.hpp"

namespace dialtraffic {

/// Flat `key = value` text configuration. Lines starting with '#' are comments.
/// Every key read through a typed getter is marked as consumed so callers can
/// reject leftovers with `require_all_consumed()`.
class KeyValueConfig {
 public:
  static constexpr std::string_view kEnvPrefix = "DIALTRAFFIC_";

  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text) {
    KeyValueConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto s = trim(line);
      if (s.empty()) continue;
      auto eq = s.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(s, "line " + std::to_string(lineno) + " is not of the form key = value");
      }
      auto key = trim(s.substr(0, eq));
      auto value = trim(s.substr(eq + 1));
      if (key.empty()) throw ConfigError("", "empty key on line " + std::to_string(lineno));
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  /// Overrides any key `k` with the environment variable DIALTRAFFIC_<K>
  /// (upper-cased), when set. Only keys in `known` are looked up.
  void apply_env_overrides(const std::vector<std::string>& known) {
    for (const auto& key : known) {
      std::string var(kEnvPrefix);
      for (char c : key) var.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      if (const char* v = std::getenv(var.c_str())) values_[key] = trim(v);
    }
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto& s = it->second;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ConfigError(key, "expected a number, got '" + s + "'");
    return v;
  }

  long long get_int(const std::string& key, long long fallback) const {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto& s = it->second;
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ConfigError(key, "expected an integer, got '" + s + "'");
    }
    return v;
  }

  void require_all_consumed() const {
    for (const auto& [k, v] : values_) {
      if (!consumed_.count(k)) throw ConfigError(k, "unknown key");
    }
  }

 private:
  static std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

}  // namespace dialtraffic
