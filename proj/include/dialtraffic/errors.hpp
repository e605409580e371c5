#pragma once

#include <stdexcept>
#include <string>

namespace dialtraffic {

/// Operand shapes do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An API was called out of order or with arguments its state cannot accept.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A NaN or infinity showed up where a finite number is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value is missing, unknown or out of range.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::invalid_argument("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dialtraffic
