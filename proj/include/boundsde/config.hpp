#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "boundsde/errors.hpp"
#include "boundsde/ingest.hpp"
#include "boundsde/numerics.hpp"

namespace boundsde {

/**
 * Flat key=value configuration with optional [section] headers; keys are
 * addressed as "section.key". Environment variables BOUNDSDE_SECTION_KEY
 * supply keys absent from the file, and built-in defaults fill the rest.
 */
class Config {
 public:
  struct Entry {
    std::string key;
    const char* default_value;  // nullptr: no default
  };

  static const std::vector<Entry>& schema() {
    static const std::vector<Entry> s = {
        {"site.latitude", nullptr},         {"site.longitude", nullptr},
        {"site.gmt_offset", nullptr},       {"site.solar_constant", "1353"},
        {"site.k", "auto"},                 {"data.production", nullptr},
        {"data.forecast", nullptr},         {"data.exclusions", ""},
        {"data.aligned", ""},               {"data.capacity_mw", nullptr},
        {"data.grid_minutes", "10"},        {"data.dataset", "all"},
        {"model.surrogate", "beta"},        {"model.eps_init", "0.07"},
        {"model.eps_tol", "0.001"},         {"model.max_iterations", "50"},
        {"model.eps_lower", "0.001"},       {"model.eps_upper", "0.25"},
        {"model.eps_search_tol", "0.0001"}, {"model.simplex_tol", "1e-6"},
        {"model.max_evaluations", "500"},   {"model.kde_tol", "0.1"},
        {"model.kde_m0", "50"},             {"run.seed", "1"},
        {"run.workers", "1"},               {"run.output_dir", "."},
    };
    return s;
  }

  static Config parse(std::istream& in, const std::string& source = "config") {
    Config c;
    std::string line, section;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      std::string_view t = detail::trim(line);
      if (t.empty() || t.front() == '#' || t.front() == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError(source + ": row " + std::to_string(row) + ": unterminated section");
        section = std::string(detail::trim(t.substr(1, t.size() - 2)));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError(source + ": row " + std::to_string(row) + ": expected key = value");
      std::string key(detail::trim(t.substr(0, eq)));
      std::string value(detail::trim(t.substr(eq + 1)));
      if (key.empty()) throw ConfigError(source + ": row " + std::to_string(row) + ": empty key");
      if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
      if (!known(key)) throw ConfigError(source + ": row " + std::to_string(row) + ": unknown key '" + key + "'");
      c.values_[key] = value;
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
  }

  static std::string env_name(const std::string& key) {
    std::string s = "BOUNDSDE_";
    for (char ch : key) s += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
  }

  /// Fills keys missing from the file from the environment, then from defaults.
  void resolve() {
    for (const auto& e : schema()) {
      if (values_.count(e.key)) continue;
      if (const char* env = std::getenv(env_name(e.key).c_str())) {
        values_[e.key] = env;
        continue;
      }
      if (e.default_value) values_[e.key] = e.default_value;
    }
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown key '" + key + "'");
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config field '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key) const {
    double v = 0.0;
    if (!detail::parse_double(get(key), v)) throw ConfigError("config field '" + key + "' is not a number");
    return v;
  }

  long long get_int(const std::string& key) const {
    const std::string& s = get(key);
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') throw ConfigError("config field '" + key + "' is not an integer");
    return v;
  }

  std::uint64_t get_u64(const std::string& key) const {
    const std::string& s = get(key);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || s.front() == '-') throw ConfigError("config field '" + key + "' is not a nonnegative integer");
    return v;
  }

  /// FNV-1a over the sorted resolved key=value lines, as 16 hex digits.
  std::string hash() const {
    std::string text;
    for (const auto& [k, v] : values_) text += k + "=" + v + "\n";
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static bool known(const std::string& key) {
    for (const auto& e : schema())
      if (e.key == key) return true;
    return false;
  }

  std::map<std::string, std::string> values_;
};

/// Header comment carried by every output file.
inline std::string provenance_line(const std::string& config_hash, std::uint64_t seed) {
  return "# config_hash=" + config_hash + " seed=" + std::to_string(seed);
}

}  // namespace boundsde
