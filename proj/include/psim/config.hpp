#pragma once

// Flat `key = value` configuration with `#` comments and dotted keys.
// Parsing is total over accepted inputs: the echoed resolved config re-parses
// to an equivalent map.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace psim {

// Raised for malformed files, unknown keys, missing keys, or bad values;
// the CLI maps it to a usage error (exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  void set_double(const std::string& key, double v);
  void set_int(const std::string& key, int64_t v);

  // Typed getters; the _or forms fall back to (and record) the default so the
  // echoed config is fully resolved.
  std::string get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback);
  int64_t get_int(const std::string& key) const;
  int64_t get_int_or(const std::string& key, int64_t fallback);
  bool get_bool_or(const std::string& key, bool fallback);

  // Keys must all belong to `known`; otherwise raises naming the offenders.
  void require_known(const std::vector<std::string>& known) const;

  // Sorted `key = value` lines (the run.txt echo).
  std::string echo() const;

  // FNV-1a over the sorted key=value pairs, skipping keys that do not affect
  // the training trajectory (budgets, output paths, logging cadence).
  uint64_t trajectory_hash() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace psim
