#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace latticecorr {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A distribution model cannot produce the requested shot.
class InfeasibleModel : public Error {
 public:
  using Error::Error;
};

// Fringe fit residual exceeded the acceptance threshold.
class ModelMismatch : public Error {
 public:
  using Error::Error;
};

// Sampling grid cannot represent the requested quantity.
class GridError : public Error {
 public:
  using Error::Error;
};

// Configuration file problem. Carries the offending key and line (0 when the
// problem is not tied to a single line, e.g. a missing key).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, std::size_t line, const std::string& what)
      : Error(format(key, line, what)), key_(key), line_(line) {}

  const std::string& key() const noexcept { return key_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& key, std::size_t line,
                            const std::string& what) {
    std::string out = what;
    if (!key.empty()) out += " [key '" + key + "'";
    if (line != 0) out += (key.empty() ? " [" : ", ") + std::string("line ") + std::to_string(line);
    if (!key.empty() || line != 0) out += "]";
    return out;
  }

  std::string key_;
  std::size_t line_;
};

}  // namespace latticecorr
