// Embedded HTTP service: the periodically regenerated station page and a
// small JSON API over the collector state and the log.

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>

#include <json.hpp>

#include "wxline/clock.hpp"
#include "wxline/collector.hpp"
#include "wxline/logstore.hpp"
#include "wxline/page.hpp"

namespace httplib {
class Server;
}

namespace wxline::web {

// Holds the page currently being served. Readers always get a complete
// page: either the one before or the one after a swap.
class PageSlot {
 public:
  explicit PageSlot(std::string initial = {});
  std::shared_ptr<const std::string> get() const;
  void set(std::string page);

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const std::string> page_;
};

// Rebuilds the page at every multiple of the page interval (counted from
// the Unix epoch) until stopped. A failed rebuild keeps the previous page
// and increments errors().
class PageRegenerator {
 public:
  using ModelSource = std::function<PageModel(SimTime)>;

  // Serves `bootstrap` until the first regeneration.
  PageRegenerator(Clock& clock, double page_interval_s, ModelSource source, const PageModel& bootstrap);

  void run(std::stop_token stop);
  void regenerate(SimTime at);

  std::shared_ptr<const std::string> page() const { return slot_.get(); }
  std::uint64_t regenerations() const { return regenerations_; }
  std::uint64_t errors() const { return errors_; }
  SimTime last_generated() const;

 private:
  Clock& clock_;
  SimDuration interval_;
  ModelSource source_;
  PageSlot slot_;
  std::atomic<std::uint64_t> regenerations_{0};
  std::atomic<std::uint64_t> errors_{0};
  std::atomic<SimDuration::rep> last_generated_{0};
};

// First multiple of `interval` (since the epoch) strictly after `t`.
SimTime next_boundary(SimTime t, SimDuration interval);

// Model source for a live collector: state snapshot plus the last 24 h of
// the log. Throws logstore::LogReadError.
PageRegenerator::ModelSource live_model_source(const collector::StateStore& state, const logstore::LogStore& log,
                                               double page_interval_s, double poll_interval_s);

nlohmann::json record_json(const logstore::LogRecord& record);
nlohmann::json record_json(const logstore::LogRecord& record, bool stale);

struct HttpRequest {
  std::string method = "GET";
  std::string path;
  std::multimap<std::string, std::string> params;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "text/plain";
  std::string body;
};

struct ApiContext {
  Clock* clock = nullptr;
  const collector::StateStore* state = nullptr;
  const logstore::LogStore* log = nullptr;
  const PageRegenerator* pages = nullptr;
  double poll_interval_s = 10;
  SimTime started_at{};
};

// Routes:
//   GET /              current page
//   GET /api/current   latest reading per station
//   GET /api/history   ?station=&from=&to= (ISO-8601, from inclusive, to exclusive)
//   GET /healthz       uptime and counters
class ApiRouter {
 public:
  explicit ApiRouter(ApiContext context) : ctx_(context) {}

  // Never throws; internal failures become 500 responses.
  HttpResponse handle(const HttpRequest& request) const;

 private:
  HttpResponse current() const;
  HttpResponse history(const HttpRequest& request) const;
  HttpResponse health() const;

  ApiContext ctx_;
};

// cpp-httplib front end for an ApiRouter.
class HttpServer {
 public:
  explicit HttpServer(const ApiRouter& router);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds `host:port` (port 0 picks one) and starts serving on a
  // background thread. Throws std::runtime_error when binding fails.
  std::uint16_t start(const std::string& host, std::uint16_t port);
  void stop();

 private:
  const ApiRouter& router_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace wxline::web
