#include "psim/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "psim/rng.hpp"  // fnv1a64

namespace psim {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Keys that do not change the training trajectory: not part of the hash, so
// a checkpoint can resume under a longer budget or a different output path.
bool trajectory_exempt(const std::string& key) {
  return key == "run.iters" || key == "run.out" || key == "run.eval_every" ||
         key == "run.checkpoint_every" || key == "run.log_every" ||
         key == "run.allow_config_mismatch" || key == "run.label" || key == "run.resume" ||
         key == "metric.tap" || key == "interp.steps" || key == "reencode.iters" ||
         key == "vae.sample_count";
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" +
                        stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.kv_[key] = value;  // later lines override earlier ones
  }
  return cfg;
}

void Config::set_double(const std::string& key, double v) { kv_[key] = format_double(v); }
void Config::set_int(const std::string& key, int64_t v) { kv_[key] = std::to_string(v); }

std::string Config::get_string(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("missing required config key '" + key + "'");
  return it->second;
}

std::string Config::get_string_or(const std::string& key, const std::string& fallback) {
  auto it = kv_.find(key);
  if (it != kv_.end()) return it->second;
  kv_[key] = fallback;
  return fallback;
}

double Config::get_double(const std::string& key) const {
  const std::string s = get_string(key);
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + s + "' is not a number");
  }
}

double Config::get_double_or(const std::string& key, double fallback) {
  if (!has(key)) set_double(key, fallback);
  return get_double(key);
}

int64_t Config::get_int(const std::string& key) const {
  const std::string s = get_string(key);
  try {
    size_t used = 0;
    const int64_t v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + s + "' is not an integer");
  }
}

int64_t Config::get_int_or(const std::string& key, int64_t fallback) {
  if (!has(key)) set_int(key, fallback);
  return get_int(key);
}

bool Config::get_bool_or(const std::string& key, bool fallback) {
  if (!has(key)) kv_[key] = fallback ? "true" : "false";
  const std::string s = get_string(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key '" + key + "': '" + s + "' is not a boolean (true/false)");
}

void Config::require_known(const std::vector<std::string>& known) const {
  std::string bad;
  for (const auto& [key, value] : kv_) {
    bool ok = false;
    for (const std::string& k : known)
      if (key == k) {
        ok = true;
        break;
      }
    if (!ok) bad += (bad.empty() ? "" : ", ") + key;
  }
  if (!bad.empty()) throw ConfigError("unknown config key(s): " + bad);
}

std::string Config::echo() const {
  std::string out;
  for (const auto& [key, value] : kv_) out += key + " = " + value + "\n";
  return out;
}

uint64_t Config::trajectory_hash() const {
  std::string blob;
  for (const auto& [key, value] : kv_) {
    if (trajectory_exempt(key)) continue;
    blob += key + "=" + value + "\n";
  }
  return fnv1a64(blob);
}

}  // namespace psim
