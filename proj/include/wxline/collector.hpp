// Collector: polls every configured station on a fixed-rate schedule,
// prints and logs each reading and keeps per-station state for the web
// layer.

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stop_token>
#include <string>
#include <vector>

#include "wxline/clock.hpp"
#include "wxline/logstore.hpp"
#include "wxline/protocol.hpp"
#include "wxline/transport.hpp"

namespace wxline::collector {

struct StationEndpoint {
  int station_id = 1;
  // `host:port` for TCP, `sim` for an in-process simulated node.
  std::string address;
};

struct CollectorConfig {
  std::vector<StationEndpoint> stations;
  double poll_interval_s = 10;
  double poll_timeout_s = 8;
  std::filesystem::path log_path = "wxlog";
  double page_interval_s = 300;
  std::string http_bind = "127.0.0.1:8080";

  // Throws std::invalid_argument.
  void validate() const;
};

struct Totals {
  std::uint64_t polls = 0;
  std::uint64_t ok = 0;
  std::uint64_t checksum_errors = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t other_errors = 0;

  bool operator==(const Totals&) const = default;
};

struct StationState {
  int station_id = 0;
  std::optional<protocol::Reading> last_reading;
  std::optional<SimTime> last_rx_time;  // same whole-second stamp as the log
  std::uint32_t consecutive_failures = 0;
  Totals totals;
  // Aggregates of every reading accepted since the collector started.
  logstore::StatsAccumulator online;

  bool operator==(const StationState&) const = default;
};

enum class PollFailure { kTimeout, kChecksumMismatch, kMalformed };
std::string_view to_string(PollFailure f);

struct PollOutcome {
  int station_id = 0;
  std::optional<protocol::Reading> reading;
  PollFailure failure = PollFailure::kTimeout;  // meaningful when !reading
  std::string detail;
  SimTime sent_at{};
  SimTime received_at{};  // when the frame was decoded (success only)
};

// Single-writer, multi-reader station table.
class StateStore {
 public:
  explicit StateStore(const std::vector<int>& station_ids = {});

  void record_success(int station_id, const protocol::Reading& reading, SimTime rx_time);
  void record_failure(int station_id, PollFailure failure);

  // current_state: a point-in-time copy ordered by station id.
  std::vector<StationState> snapshot() const;

 private:
  StationState& slot(int station_id);

  mutable std::mutex mutex_;
  std::map<int, StationState> stations_;
};

// Connection to one station, re-established on demand.
class StationLink {
 public:
  virtual ~StationLink() = default;
  // nullptr when the station cannot be reached before `deadline`.
  virtual Transport* connect(Clock& clock, SimTime deadline) = 0;
  // Drops a broken connection.
  virtual void reset() = 0;
};

// Wraps an already-open transport (in-process pairs).
class FixedLink final : public StationLink {
 public:
  explicit FixedLink(std::unique_ptr<Transport> transport) : transport_(std::move(transport)) {}
  Transport* connect(Clock&, SimTime) override { return transport_.get(); }
  void reset() override {}

 private:
  std::unique_ptr<Transport> transport_;
};

class TcpLink final : public StationLink {
 public:
  explicit TcpLink(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
  Transport* connect(Clock& clock, SimTime deadline) override;
  void reset() override { transport_.reset(); }

 private:
  Endpoint endpoint_;
  std::unique_ptr<TcpTransport> transport_;
};

// Polls one station: writes a poll frame and scans replies until a reading
// for that station arrives or `timeout` elapses.
PollOutcome poll_once(int station_id, Transport& transport, Clock& clock, SimDuration timeout);

// `<ISO-8601> st=<id> seq=<n> T=<x>C RH=<x>% IRR=<n>W/m2 WS=<x>m/s WD=<n>deg`
std::string console_line(const protocol::Reading& reading, SimTime rx_time);

class Collector {
 public:
  // `console` may be null.
  Collector(CollectorConfig config, Clock& clock, logstore::LogStore& log, std::ostream* console = nullptr);

  void attach(int station_id, std::unique_ptr<StationLink> link);

  // Called after each poll with its outcome, on the poll-loop thread.
  void set_observer(std::function<void(const PollOutcome&)> observer) { observer_ = std::move(observer); }

  // run_collector: fixed-rate ticks at start + n * poll_interval until
  // `stop`. A tick that starts late runs immediately; ticks more than one
  // interval overdue are skipped. Throws logstore::LogWriteError when a
  // reading cannot be logged after one retry.
  void run(std::stop_token stop);

  // One round over every station in id order.
  void tick();

  std::vector<StationState> current_state() const { return state_.snapshot(); }
  const StateStore& state() const { return state_; }
  const CollectorConfig& config() const { return config_; }
  std::uint64_t ticks() const { return ticks_; }
  std::uint64_t skipped_ticks() const { return skipped_ticks_; }

 private:
  void commit(const PollOutcome& outcome);

  CollectorConfig config_;
  Clock& clock_;
  logstore::LogStore& log_;
  std::ostream* console_;
  StateStore state_;
  std::map<int, std::unique_ptr<StationLink>> links_;
  std::function<void(const PollOutcome&)> observer_;
  std::atomic<std::uint64_t> ticks_{0};
  std::atomic<std::uint64_t> skipped_ticks_{0};
};

}  // namespace wxline::collector
