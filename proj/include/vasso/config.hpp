#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vasso {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace detail

/// Flat `key = value` configuration with `#` comments and comma-separated
/// lists. Every key a subcommand resolves is remembered; any raw key never
/// resolved is rejected by name, and the fully materialized map can be echoed
/// next to the outputs for provenance.
class Config {
 public:
  Config() = default;

  static Config parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected key = value");
      const std::string key = detail::trim(line.substr(0, eq));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": empty key");
      cfg.raw_[key] = detail::trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
  }

  /// Applies a `key=value` command-line override.
  void override_kv(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must be key=value: " + kv);
    raw_[detail::trim(kv.substr(0, eq))] = detail::trim(kv.substr(eq + 1));
  }

  std::string get_string(const std::string& key, const std::string& def) {
    const auto it = raw_.find(key);
    const std::string v = it == raw_.end() ? def : it->second;
    resolved_[key] = v;
    return v;
  }

  double get_double(const std::string& key, double def) {
    const auto it = raw_.find(key);
    double v = def;
    if (it != raw_.end()) v = to_double(key, it->second);
    resolved_[key] = format_double(v);
    return v;
  }

  long get_int(const std::string& key, long def) {
    const auto it = raw_.find(key);
    long v = def;
    if (it != raw_.end()) v = to_int(key, it->second);
    resolved_[key] = std::to_string(v);
    return v;
  }

  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::string& def) {
    const auto it = raw_.find(key);
    const std::string v = it == raw_.end() ? def : it->second;
    resolved_[key] = v;
    return split(v);
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::string& def) {
    std::vector<double> out;
    for (const auto& s : get_string_list(key, def))
      out.push_back(to_double(key, s));
    return out;
  }

  std::vector<long> get_int_list(const std::string& key,
                                 const std::string& def) {
    std::vector<long> out;
    for (const auto& s : get_string_list(key, def))
      out.push_back(to_int(key, s));
    return out;
  }

  /// Rejects any raw key that was never resolved, naming the offender.
  void reject_unknown() const {
    for (const auto& [key, value] : raw_)
      if (!resolved_.contains(key))
        throw ConfigError("unknown config key: " + key);
  }

  /// The fully materialized configuration, one sorted `key = value` per line.
  std::string resolved_text() const {
    std::string out;
    for (const auto& [key, value] : resolved_)
      out += key + " = " + value + "\n";
    return out;
  }

 private:
  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(s);
    while (std::getline(in, cell, ',')) {
      cell = detail::trim(cell);
      if (!cell.empty()) out.push_back(cell);
    }
    return out;
  }

  static double to_double(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": not a real: " + s);
    }
  }

  static long to_int(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const long v = std::stol(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": not an integer: " + s);
    }
  }

  static std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

  std::map<std::string, std::string> raw_;
  std::map<std::string, std::string> resolved_;
};

}  // namespace vasso
