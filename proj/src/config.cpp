#include "wxline/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace wxline::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValues parse_ini(std::string_view text) {
  KeyValues out;
  std::string section;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(fmt::format("line {}: unterminated section header", line_no));
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError(fmt::format("line {}: empty section name", line_no));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", line_no));
    if (section.empty()) throw ConfigError(fmt::format("line {}: key outside any section", line_no));
    out[section + "." + std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

KeyValues load_ini(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_ini(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

const std::vector<KeySpec>& known_keys() {
  static const std::vector<KeySpec> keys = {
      {"node.station_id", "1"},
      {"node.listen", "127.0.0.1:5001"},
      {"node.baud", "9600"},
      {"node.latency_min_s", "4.0"},
      {"node.latency_max_s", "5.0"},
      {"node.time_scale", "1"},
      {"node.safe_baud", "115200"},
      {"node.max_baud", "1000000"},
      {"node.p_max", "0.02"},
      {"climate.t_mean", "26.0"},
      {"climate.t_amplitude", "6.0"},
      {"climate.t_peak_hour", "15.0"},
      {"climate.s_max", "1000"},
      {"climate.sunrise_hour", "6.0"},
      {"climate.sunset_hour", "18.0"},
      {"climate.rh_base", "75.0"},
      {"climate.rh_temp_slope", "-1.5"},
      {"climate.wind_mean", "4.0"},
      {"climate.wind_reversion", "0.01"},
      {"climate.wind_noise", "0.3"},
      {"climate.seed", "1"},
      {"collector.stations", "1@127.0.0.1:5001"},
      {"collector.poll_interval_s", "10"},
      {"collector.poll_timeout_s", "8"},
      {"collector.log_path", "wxlog"},
      {"collector.time_scale", "1"},
      {"collector.durable", "true"},
      {"http.bind", "127.0.0.1:8080"},
      {"http.page_interval_s", "300"},
  };
  return keys;
}

Settings::Settings(KeyValues file, KeyValues overrides) : file_(std::move(file)), overrides_(std::move(overrides)) {
  for (const auto& spec : known_keys()) defaults_.emplace(spec.key, spec.default_value);
  for (const KeyValues* layer : {&file_, &overrides_}) {
    for (const auto& [key, value] : *layer) {
      if (!defaults_.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
    }
  }
}

std::string Settings::get(std::string_view key) const {
  const std::string k(key);
  for (const KeyValues* layer : {&overrides_, &file_, &defaults_}) {
    if (auto it = layer->find(k); it != layer->end()) return it->second;
  }
  throw ConfigError("unknown configuration key '" + k + "'");
}

double Settings::get_double(std::string_view key) const {
  const std::string text = get(key);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno != 0) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
  }
  return v;
}

long long Settings::get_int(std::string_view key) const {
  const std::string text = get(key);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, text));
  }
  return v;
}

bool Settings::get_bool(std::string_view key) const {
  const std::string text = get(key);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, text));
}

std::vector<collector::StationEndpoint> parse_stations(std::string_view text) {
  std::vector<collector::StationEndpoint> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = trim(text.substr(0, comma));
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) continue;
    const auto at = item.find('@');
    if (at == std::string_view::npos) throw ConfigError(fmt::format("station '{}' is not id@address", item));
    const auto id = protocol::parse_unsigned(trim(item.substr(0, at)));
    if (!id) throw ConfigError(fmt::format("station '{}' has a bad id", item));
    out.push_back({*id, std::string(trim(item.substr(at + 1)))});
  }
  return out;
}

nodesim::NodeConfig node_config(const Settings& s) {
  nodesim::NodeConfig c;
  try {
    c.station_id = static_cast<int>(s.get_int("node.station_id"));
    c.baud = s.get_double("node.baud");
    c.latency_min_s = s.get_double("node.latency_min_s");
    c.latency_max_s = s.get_double("node.latency_max_s");
    c.time_scale = s.get_double("node.time_scale");
    c.corruption.safe_baud = s.get_double("node.safe_baud");
    c.corruption.max_baud = s.get_double("node.max_baud");
    c.corruption.p_max = s.get_double("node.p_max");
    auto& m = c.climate;
    m.t_mean = s.get_double("climate.t_mean");
    m.t_amplitude = s.get_double("climate.t_amplitude");
    m.t_peak_hour = s.get_double("climate.t_peak_hour");
    m.s_max = s.get_double("climate.s_max");
    m.sunrise_hour = s.get_double("climate.sunrise_hour");
    m.sunset_hour = s.get_double("climate.sunset_hour");
    m.rh_base = s.get_double("climate.rh_base");
    m.rh_temp_slope = s.get_double("climate.rh_temp_slope");
    m.wind_mean = s.get_double("climate.wind_mean");
    m.wind_reversion = s.get_double("climate.wind_reversion");
    m.wind_noise = s.get_double("climate.wind_noise");
    m.seed = static_cast<std::uint64_t>(s.get_int("climate.seed"));
    c.validate();
    if (!parse_endpoint(s.get("node.listen"))) throw ConfigError("node.listen must be host:port");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

collector::CollectorConfig collector_config(const Settings& s) {
  collector::CollectorConfig c;
  try {
    c.stations = parse_stations(s.get("collector.stations"));
    c.poll_interval_s = s.get_double("collector.poll_interval_s");
    c.poll_timeout_s = s.get_double("collector.poll_timeout_s");
    c.log_path = s.get("collector.log_path");
    c.page_interval_s = s.get_double("http.page_interval_s");
    c.http_bind = s.get("http.bind");
    c.validate();
    if (!parse_endpoint(c.http_bind)) throw ConfigError("http.bind must be host:port");
    if (!(s.get_double("collector.time_scale") >= 1)) throw ConfigError("collector.time_scale must be >= 1");
    s.get_bool("collector.durable");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace wxline::cli
