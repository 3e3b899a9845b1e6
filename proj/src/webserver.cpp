#include "wxline/webserver.hpp"

#include <stdexcept>

#include <fmt/format.h>
#include <httplib.h>

namespace wxline::web {

using nlohmann::json;

PageSlot::PageSlot(std::string initial) : page_(std::make_shared<const std::string>(std::move(initial))) {}

std::shared_ptr<const std::string> PageSlot::get() const {
  std::lock_guard lock(mutex_);
  return page_;
}

void PageSlot::set(std::string page) {
  auto next = std::make_shared<const std::string>(std::move(page));
  std::lock_guard lock(mutex_);
  page_ = std::move(next);
}

SimTime next_boundary(SimTime t, SimDuration interval) {
  const auto since_epoch = t.time_since_epoch();
  auto k = since_epoch / interval;
  if (since_epoch.count() < 0 && since_epoch % interval != SimDuration::zero()) --k;
  return SimTime{(k + 1) * interval};
}

PageRegenerator::PageRegenerator(Clock& clock, double page_interval_s, ModelSource source, const PageModel& bootstrap)
    : clock_(clock),
      interval_(seconds_to_duration(page_interval_s)),
      source_(std::move(source)),
      slot_(render_page(bootstrap)),
      last_generated_(bootstrap.generated_at.time_since_epoch().count()) {
  if (interval_ <= SimDuration::zero()) throw std::invalid_argument("page interval must be positive");
}

SimTime PageRegenerator::last_generated() const { return SimTime{SimDuration{last_generated_.load()}}; }

void PageRegenerator::regenerate(SimTime at) {
  try {
    slot_.set(render_page(source_(at)));
    last_generated_ = at.time_since_epoch().count();
    ++regenerations_;
  } catch (const std::exception&) {
    ++errors_;
  }
}

void PageRegenerator::run(std::stop_token stop) {
  SimTime next = next_boundary(clock_.now(), interval_);
  while (clock_.sleep_until(next, stop)) {
    regenerate(next);
    next += interval_;
    const SimTime now = clock_.now();
    if (next <= now) next = next_boundary(now, interval_);
  }
}

PageRegenerator::ModelSource live_model_source(const collector::StateStore& state, const logstore::LogStore& log,
                                               double page_interval_s, double poll_interval_s) {
  return [&state, &log, page_interval_s, poll_interval_s](SimTime at) {
    const auto snapshot = state.snapshot();
    const auto window = log.read_range(at - kPageWindow, at);
    return make_page_model(at, page_interval_s, poll_interval_s, snapshot, window.records);
  };
}

json record_json(const logstore::LogRecord& rec) {
  const auto& r = rec.reading;
  return json{{"station_id", r.station_id},
              {"seq", r.seq},
              {"rx_time", format_iso8601(rec.rx_time)},
              {"temp_c", r.temperature.value()},
              {"rh_pct", r.humidity.value()},
              {"irr_wm2", r.irradiance},
              {"wind_ms", r.wind_speed.value()},
              {"wind_deg", r.wind_dir}};
}

json record_json(const logstore::LogRecord& rec, bool stale) {
  json j = record_json(rec);
  j["stale"] = stale;
  return j;
}

// ---------------------------------------------------------------------------

namespace {

HttpResponse json_response(int status, const json& body) { return {status, "application/json", body.dump() + "\n"}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, json{{"error", message}});
}

}  // namespace

HttpResponse ApiRouter::handle(const HttpRequest& request) const {
  try {
    if (request.method != "GET" && request.method != "HEAD") return error_response(405, "method not allowed");
    if (request.path == "/" || request.path == "/index.html") {
      return {200, "text/html; charset=utf-8", *ctx_.pages->page()};
    }
    if (request.path == "/api/current") return current();
    if (request.path == "/api/history") return history(request);
    if (request.path == "/healthz") return health();
    return error_response(404, "not found: " + request.path);
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse ApiRouter::current() const {
  const SimTime now = ctx_.clock->now();
  json out = json::array();
  for (const auto& s : ctx_.state->snapshot()) {
    if (!s.last_reading || !s.last_rx_time) continue;
    const logstore::LogRecord rec{*s.last_rx_time, *s.last_reading};
    out.push_back(record_json(rec, is_stale(*s.last_rx_time, now, ctx_.poll_interval_s)));
  }
  return json_response(200, out);
}

HttpResponse ApiRouter::history(const HttpRequest& request) const {
  auto single = [&](const std::string& key) -> std::optional<std::string> {
    const auto [lo, hi] = request.params.equal_range(key);
    if (lo == hi) return std::nullopt;
    if (std::next(lo) != hi) throw std::invalid_argument("parameter '" + key + "' given more than once");
    return lo->second;
  };

  std::optional<int> station;
  SimTime from{}, to{};
  try {
    if (const auto text = single("station")) {
      const auto id = protocol::parse_unsigned(*text);
      if (!id || *id < protocol::kMinStationId || *id > protocol::kMaxStationId) {
        return error_response(400, "station must be an integer in 1..255");
      }
      station = *id;
    }
    const auto from_text = single("from");
    const auto to_text = single("to");
    if (to_text) {
      const auto t = parse_iso8601(*to_text);
      if (!t) return error_response(400, "'to' is not an ISO-8601 UTC time");
      to = *t;
    } else {
      to = floor_seconds(ctx_.clock->now()) + std::chrono::seconds(1);
    }
    if (from_text) {
      const auto t = parse_iso8601(*from_text);
      if (!t) return error_response(400, "'from' is not an ISO-8601 UTC time");
      from = *t;
    } else {
      from = to - kPageWindow;
    }
  } catch (const std::invalid_argument& e) {
    return error_response(400, e.what());
  }
  if (from > to) return error_response(400, "'from' is after 'to'");

  json out = json::array();
  for (const auto& rec : ctx_.log->read_range(from, to, station).records) out.push_back(record_json(rec));
  return json_response(200, out);
}

HttpResponse ApiRouter::health() const {
  const SimTime now = ctx_.clock->now();
  json stations = json::array();
  for (const auto& s : ctx_.state->snapshot()) {
    json j{{"station_id", s.station_id},
           {"polls", s.totals.polls},
           {"ok", s.totals.ok},
           {"checksum_errors", s.totals.checksum_errors},
           {"timeouts", s.totals.timeouts},
           {"other_errors", s.totals.other_errors},
           {"consecutive_failures", s.consecutive_failures}};
    j["last_rx_time"] = s.last_rx_time ? json(format_iso8601(*s.last_rx_time)) : json(nullptr);
    stations.push_back(std::move(j));
  }
  json body{{"status", "ok"},
            {"time", format_iso8601(now)},
            {"uptime_s", duration_to_seconds(now - ctx_.started_at)},
            {"stations", std::move(stations)}};
  if (ctx_.pages != nullptr) {
    body["page_regenerations"] = ctx_.pages->regenerations();
    body["page_errors"] = ctx_.pages->errors();
    body["page_generated_at"] = format_iso8601(ctx_.pages->last_generated());
  }
  return json_response(200, body);
}

// ---------------------------------------------------------------------------

HttpServer::HttpServer(const ApiRouter& router) : router_(router), server_(std::make_unique<httplib::Server>()) {
  auto serve = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest request;
    request.method = req.method;
    request.path = req.path;
    for (const auto& [k, v] : req.params) request.params.emplace(k, v);
    const HttpResponse response = router_.handle(request);
    res.status = response.status;
    res.set_content(response.body, response.content_type);
  };
  server_->Get(".*", serve);
  server_->Post(".*", serve);
  server_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    res.status = 500;
    res.set_content("{\"error\":\"internal error\"}\n", "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

std::uint16_t HttpServer::start(const std::string& host, std::uint16_t port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw std::runtime_error(fmt::format("cannot bind HTTP server to {}:{}", host, port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  return static_cast<std::uint16_t>(bound);
}

void HttpServer::stop() {
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

}  // namespace wxline::web
