#include "wxline/commands.hpp"

#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <system_error>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "wxline/collector.hpp"
#include "wxline/config.hpp"
#include "wxline/nodesim.hpp"
#include "wxline/replay.hpp"
#include "wxline/webserver.hpp"

namespace wxline::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Command-line flags that shadow configuration keys.
class Overrides {
 public:
  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    bound_.emplace_back(app->add_option(flag, values_[key], help), key);
  }

  void add_config_options(CLI::App* app) {
    app->add_option("--config", config_path_, "configuration file (default: $WXLINE_CONFIG)");
    app->add_option("--set", sets_, "override any key, e.g. --set climate.seed=7");
  }

  Settings settings() const {
    KeyValues overrides;
    for (const auto& item : sets_) {
      const auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + item + "'");
      overrides[item.substr(0, eq)] = item.substr(eq + 1);
    }
    for (const auto& [option, key] : bound_) {
      if (option->count() > 0) overrides[key] = values_.at(key);
    }
    KeyValues file;
    if (!config_path_.empty()) {
      file = load_ini(config_path_);
    } else if (const char* env = std::getenv("WXLINE_CONFIG"); env != nullptr && *env != '\0') {
      file = load_ini(env);
    }
    return Settings(std::move(file), std::move(overrides));
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::pair<CLI::Option*, std::string>> bound_;
  std::string config_path_;
  std::vector<std::string> sets_;
};

void wait_for_stop(std::stop_token stop) {
  std::mutex m;
  std::condition_variable_any cv;
  std::unique_lock lock(m);
  cv.wait(lock, stop, [] { return false; });
}

// `24h`, `30m`, `90s`, `7d` or a bare number of seconds.
SimDuration parse_window(const std::string& text) {
  if (text.empty()) throw UsageError("empty --window");
  double unit = 1;
  std::string number = text;
  switch (text.back()) {
    case 's': unit = 1; number.pop_back(); break;
    case 'm': unit = 60; number.pop_back(); break;
    case 'h': unit = 3600; number.pop_back(); break;
    case 'd': unit = 86400; number.pop_back(); break;
    default: break;
  }
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(number.c_str(), &end);
  if (number.empty() || end != number.c_str() + number.size() || errno != 0 || !(v > 0) || !std::isfinite(v)) {
    throw UsageError("cannot parse --window '" + text + "'");
  }
  return seconds_to_duration(v * unit);
}

SimTime parse_time_flag(const std::string& flag, const std::string& text) {
  const auto t = parse_iso8601(text);
  if (!t) throw UsageError(fmt::format("{} '{}' is not an ISO-8601 UTC time", flag, text));
  return *t;
}

SimTime wall_now() { return std::chrono::time_point_cast<SimDuration>(std::chrono::system_clock::now()); }

std::vector<int> station_ids(const collector::CollectorConfig& config) {
  std::vector<int> ids;
  for (const auto& s : config.stations) ids.push_back(s.station_id);
  return ids;
}

// ---------------------------------------------------------------------------

int cmd_node(const Settings& settings, std::stop_token stop, std::ostream& out, std::ostream& err) {
  const nodesim::NodeConfig config = node_config(settings);
  const Endpoint listen = *parse_endpoint(settings.get("node.listen"));

  std::unique_ptr<TcpListener> listener;
  try {
    listener = std::make_unique<TcpListener>(listen);
  } catch (const std::system_error& e) {
    fmt::print(err, "wxline node: cannot listen on {}:{}: {}\n", listen.host, listen.port, e.what());
    return kExitFailure;
  }
  fmt::print(out, "node {} listening on {}:{} (baud {}, time scale {})\n", config.station_id, listen.host,
             listener->port(), config.baud, config.time_scale);
  out.flush();

  ScaledSystemClock clock(config.time_scale);
  nodesim::SensorNode node(config);
  while (!stop.stop_requested()) {
    auto connection = listener->accept(stop);
    if (!connection) break;
    run_node(node, *connection, clock, stop);
  }
  return kExitOk;
}

int cmd_collect(const Settings& settings, std::stop_token outer_stop, std::ostream& out, std::ostream& err) {
  const collector::CollectorConfig config = collector_config(settings);
  const double time_scale = settings.get_double("collector.time_scale");
  const bool durable = settings.get_bool("collector.durable");
  const Endpoint bind = *parse_endpoint(config.http_bind);
  bool any_sim = false;
  for (const auto& s : config.stations) any_sim = any_sim || s.address == "sim";
  const nodesim::NodeConfig node_template = any_sim ? node_config(settings) : nodesim::NodeConfig{};

  std::error_code ec;
  std::filesystem::create_directories(config.log_path, ec);
  if (ec || ::access(config.log_path.c_str(), W_OK) != 0) {
    fmt::print(err, "wxline collect: log directory {} is not writable\n", config.log_path.string());
    return kExitFailure;
  }

  ScaledSystemClock clock(time_scale);
  logstore::LogStore log(config.log_path, durable);
  collector::Collector collector(config, clock, log, &out);

  std::vector<std::unique_ptr<nodesim::SensorNode>> sim_nodes;
  std::vector<std::unique_ptr<Transport>> sim_ends;
  for (const auto& s : config.stations) {
    if (s.address == "sim") {
      nodesim::NodeConfig nc = node_template;
      nc.station_id = s.station_id;
      nc.climate.seed = node_template.climate.seed + static_cast<std::uint64_t>(s.station_id) - 1;
      sim_nodes.push_back(std::make_unique<nodesim::SensorNode>(nc));
      auto [collector_end, node_end] = make_in_process_pair(clock);
      sim_ends.push_back(std::move(node_end));
      collector.attach(s.station_id, std::make_unique<collector::FixedLink>(std::move(collector_end)));
    } else {
      collector.attach(s.station_id, std::make_unique<collector::TcpLink>(*parse_endpoint(s.address)));
    }
  }

  const SimTime started = clock.now();
  web::PageRegenerator pages(
      clock, config.page_interval_s,
      web::live_model_source(collector.state(), log, config.page_interval_s, config.poll_interval_s),
      web::make_page_model(started, config.page_interval_s, config.poll_interval_s, collector.current_state(), {}));
  const web::ApiRouter router(web::ApiContext{&clock, &collector.state(), &log, &pages, config.poll_interval_s, started});
  web::HttpServer server(router);
  std::uint16_t port = 0;
  try {
    port = server.start(bind.host, bind.port);
  } catch (const std::exception& e) {
    fmt::print(err, "wxline collect: {}\n", e.what());
    return kExitFailure;
  }
  fmt::print(out, "serving http://{}:{}/ ({} station(s), log {})\n", bind.host, port, config.stations.size(),
             config.log_path.string());
  out.flush();

  std::stop_source inner;
  std::stop_callback forward(outer_stop, [&inner] { inner.request_stop(); });
  std::string fatal;
  std::mutex fatal_mutex;
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < sim_nodes.size(); ++i) {
      threads.emplace_back([&, i] {
        run_node(*sim_nodes[i], *sim_ends[i], clock, inner.get_token());
        sim_ends[i]->close();
      });
    }
    threads.emplace_back([&] { pages.run(inner.get_token()); });
    threads.emplace_back([&] {
      try {
        collector.run(inner.get_token());
      } catch (const std::exception& e) {
        std::lock_guard lock(fatal_mutex);
        fatal = e.what();
        inner.request_stop();
      }
    });
    wait_for_stop(inner.get_token());
  }
  server.stop();
  log.close();

  if (!fatal.empty()) {
    fmt::print(err, "wxline collect: {}\n", fatal);
    return kExitFailure;
  }
  fmt::print(err, "wxline collect: stopped after {} tick(s)\n", collector.ticks());
  return kExitOk;
}

struct StatsArgs {
  std::string log;
  std::string from;
  std::string to;
  std::string window;
  int station = 0;
  bool csv = false;
};

int cmd_stats(const Settings& settings, const StatsArgs& args, std::ostream& out) {
  const std::filesystem::path path = args.log.empty() ? std::filesystem::path(settings.get("collector.log_path"))
                                                      : std::filesystem::path(args.log);
  std::optional<int> station;
  if (args.station != 0) {
    if (args.station < protocol::kMinStationId || args.station > protocol::kMaxStationId) {
      throw UsageError("--station must be in 1..255");
    }
    station = args.station;
  }

  std::optional<SimTime> from, to;
  if (!args.from.empty()) from = parse_time_flag("--from", args.from);
  if (!args.to.empty()) to = parse_time_flag("--to", args.to);
  if (!args.window.empty()) {
    const SimDuration window = parse_window(args.window);
    if (from && to) throw UsageError("--window cannot be combined with both --from and --to");
    if (from) {
      to = *from + window;
    } else {
      if (!to) to = floor_seconds(wall_now()) + std::chrono::seconds(1);
      from = *to - window;
    }
  }
  if (from && to && *from > *to) throw UsageError("--from is after --to");

  const logstore::LogStore log(path, false);
  const auto result = (from || to) ? log.read_range(from.value_or(SimTime::min()), to.value_or(kSimTimeMax), station)
                                   : log.read_all(station);
  if (result.records.empty()) {
    fmt::print(out, "no records\n");
    return kExitOk;
  }

  SimTime lo = result.records.front().rx_time;
  SimTime hi = lo;
  for (const auto& r : result.records) {
    lo = std::min(lo, r.rx_time);
    hi = std::max(hi, r.rx_time);
  }
  const SimTime window_from = from.value_or(lo);
  const SimTime window_to = to.value_or(hi + std::chrono::seconds(1));
  const auto stats = logstore::aggregate(result.records, window_from, window_to);

  if (args.csv) {
    fmt::print(out, "quantity,count,min,max,mean\n");
    for (const auto q : logstore::kAllQuantities) {
      const auto& s = *stats[q];
      fmt::print(out, "{},{},{},{},{}\n", logstore::quantity_name(q), stats.count, logstore::format_quantity(q, s.min),
                 logstore::format_quantity(q, s.max), fmt::format("{:.{}f}", s.mean, logstore::quantity_decimals(q) + 1));
    }
    return kExitOk;
  }

  fmt::print(out, "window   {} .. {}\n", format_iso8601(stats.from), format_iso8601(stats.to));
  fmt::print(out, "records  {}", stats.count);
  if (result.malformed > 0) fmt::print(out, " ({} malformed line(s) skipped)", result.malformed);
  fmt::print(out, "\n\n{:<10} {:>8} {:>10} {:>10} {:>10}\n", "quantity", "unit", "min", "max", "mean");
  for (const auto q : logstore::kAllQuantities) {
    const auto& s = *stats[q];
    fmt::print(out, "{:<10} {:>8} {:>10} {:>10} {:>10}\n", logstore::quantity_name(q), logstore::quantity_unit(q),
               logstore::format_quantity(q, s.min), logstore::format_quantity(q, s.max),
               fmt::format("{:.{}f}", s.mean, logstore::quantity_decimals(q) + 1));
  }
  return kExitOk;
}

struct ReplayArgs {
  std::string log;
  std::string speed = "max";
  std::string until;
  std::string out_dir;
};

double parse_speed(const std::string& text) {
  if (text == "max" || text == "inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !(v > 0)) {
    throw UsageError("--speed must be a positive number or 'max', got '" + text + "'");
  }
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << content;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

int cmd_replay(const Settings& settings, const ReplayArgs& args, std::ostream& out, std::ostream& err) {
  const collector::CollectorConfig config = collector_config(settings);
  ReplayOptions options;
  options.stations = station_ids(config);
  options.poll_interval_s = config.poll_interval_s;
  options.page_interval_s = config.page_interval_s;
  options.speed = parse_speed(args.speed);
  if (!args.until.empty()) options.until = parse_time_flag("--until", args.until);
  const std::filesystem::path path = args.log.empty() ? config.log_path : std::filesystem::path(args.log);

  std::optional<std::filesystem::path> out_dir;
  if (!args.out_dir.empty()) {
    out_dir = args.out_dir;
    std::filesystem::create_directories(*out_dir);
  }

  const logstore::LogStore log(path, false);
  const auto result = replay_log(log, options, [&](SimTime at, const std::string& page) {
    if (out_dir) {
      std::string stamp = format_iso8601(at);
      std::erase_if(stamp, [](char c) { return c == '-' || c == ':'; });
      write_file(*out_dir / ("page-" + stamp + ".html"), page);
    }
  });

  if (out_dir) {
    write_file(*out_dir / "final.html", result.final_page);
  } else {
    out << result.final_page;
  }
  fmt::print(err, "replayed {} record(s), {} page(s), {} malformed line(s) skipped; final page at {}\n",
             result.records, result.pages, result.malformed, format_iso8601(result.final_generated_at));
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::stop_token stop, std::ostream& out, std::ostream& err) {
  CLI::App app("Weather station simulator, collector and web service", "wxline");
  app.require_subcommand(1);

  Overrides node_flags;
  auto* node = app.add_subcommand("node", "run a simulated station on a TCP port");
  node_flags.add_config_options(node);
  node_flags.bind(node, "--station-id", "node.station_id", "station id (1..255)");
  node_flags.bind(node, "--listen", "node.listen", "host:port to listen on");
  node_flags.bind(node, "--baud", "node.baud", "simulated serial line rate");
  node_flags.bind(node, "--time-scale", "node.time_scale", "station seconds per wall second");
  node_flags.bind(node, "--latency-min", "node.latency_min_s", "minimum response latency (s)");
  node_flags.bind(node, "--latency-max", "node.latency_max_s", "maximum response latency (s)");
  node_flags.bind(node, "--p-max", "node.p_max", "per-byte corruption probability at max baud");
  node_flags.bind(node, "--seed", "climate.seed", "random seed");

  Overrides collect_flags;
  auto* collect = app.add_subcommand("collect", "poll stations, log readings and serve the web page");
  collect_flags.add_config_options(collect);
  collect_flags.bind(collect, "--stations", "collector.stations", "id@host:port or id@sim, comma separated");
  collect_flags.bind(collect, "--log", "collector.log_path", "log directory");
  collect_flags.bind(collect, "--poll-interval", "collector.poll_interval_s", "seconds between polls");
  collect_flags.bind(collect, "--poll-timeout", "collector.poll_timeout_s", "seconds to wait for a reply");
  collect_flags.bind(collect, "--time-scale", "collector.time_scale", "station seconds per wall second");
  collect_flags.bind(collect, "--durable", "collector.durable", "fdatasync after every append (true/false)");
  collect_flags.bind(collect, "--bind", "http.bind", "host:port for the HTTP service");
  collect_flags.bind(collect, "--page-interval", "http.page_interval_s", "seconds between page rebuilds");

  Overrides stats_flags;
  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "summarise a log");
  stats_flags.add_config_options(stats);
  stats->add_option("--log", stats_args.log, "log directory (default: collector.log_path)");
  stats->add_option("--from", stats_args.from, "start time, inclusive (ISO-8601 UTC)");
  stats->add_option("--to", stats_args.to, "end time, exclusive (ISO-8601 UTC)");
  stats->add_option("--window", stats_args.window, "window length, e.g. 24h, 30m, 600s");
  stats->add_option("--station", stats_args.station, "only this station");
  stats->add_flag("--csv", stats_args.csv, "print CSV instead of a table");

  Overrides replay_flags;
  ReplayArgs replay_args;
  auto* replay = app.add_subcommand("replay", "rebuild the web pages from a log");
  replay_flags.add_config_options(replay);
  replay->add_option("--log", replay_args.log, "log directory (default: collector.log_path)");
  replay->add_option("--speed", replay_args.speed, "station seconds per wall second, or 'max'");
  replay->add_option("--until", replay_args.until, "last regeneration instant (ISO-8601 UTC)");
  replay->add_option("--out", replay_args.out_dir, "write every page and final.html here instead of stdout");
  replay_flags.bind(replay, "--stations", "collector.stations", "configured stations");
  replay_flags.bind(replay, "--poll-interval", "collector.poll_interval_s", "seconds between polls");
  replay_flags.bind(replay, "--page-interval", "http.page_interval_s", "seconds between page rebuilds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (node->parsed()) return cmd_node(node_flags.settings(), stop, out, err);
    if (collect->parsed()) return cmd_collect(collect_flags.settings(), stop, out, err);
    if (stats->parsed()) return cmd_stats(stats_flags.settings(), stats_args, out);
    if (replay->parsed()) return cmd_replay(replay_flags.settings(), replay_args, out, err);
  } catch (const ConfigError& e) {
    fmt::print(err, "wxline: configuration error: {}\n", e.what());
    return kExitUsage;
  } catch (const UsageError& e) {
    fmt::print(err, "wxline: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(err, "wxline: {}\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace wxline::cli
