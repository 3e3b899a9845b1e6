// INI-style configuration with layered precedence:
// command-line override > configuration file > built-in default.
//
//   [node]
//   station_id = 1
//   baud = 9600
//
// Keys are addressed as `section.key`.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wxline/collector.hpp"
#include "wxline/nodesim.hpp"

namespace wxline::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;

// Throws ConfigError naming the offending line.
KeyValues parse_ini(std::string_view text);
KeyValues load_ini(const std::filesystem::path& path);

struct KeySpec {
  std::string_view key;
  std::string_view default_value;
};

// Every recognised key with its default.
const std::vector<KeySpec>& known_keys();

class Settings {
 public:
  // Throws ConfigError on keys outside known_keys().
  Settings(KeyValues file = {}, KeyValues overrides = {});

  std::string get(std::string_view key) const;
  double get_double(std::string_view key) const;
  long long get_int(std::string_view key) const;
  bool get_bool(std::string_view key) const;

 private:
  KeyValues defaults_;
  KeyValues file_;
  KeyValues overrides_;
};

// Parses `id@address[,id@address...]`.
std::vector<collector::StationEndpoint> parse_stations(std::string_view text);

// Both throw ConfigError (wrapping the module's own validation message).
nodesim::NodeConfig node_config(const Settings& settings);
collector::CollectorConfig collector_config(const Settings& settings);

}  // namespace wxline::cli
