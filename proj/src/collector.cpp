#include "wxline/collector.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace wxline::collector {

void CollectorConfig::validate() const {
  if (!(poll_interval_s > 0) || !(poll_timeout_s > 0) || !(page_interval_s > 0)) {
    throw std::invalid_argument("collector: intervals must be positive");
  }
  if (!(poll_timeout_s < poll_interval_s)) {
    throw std::invalid_argument("collector: poll_timeout_s must be below poll_interval_s");
  }
  if (log_path.empty()) throw std::invalid_argument("collector: log_path is empty");
  std::set<int> seen;
  for (const auto& s : stations) {
    if (s.station_id < protocol::kMinStationId || s.station_id > protocol::kMaxStationId) {
      throw std::invalid_argument(fmt::format("collector: station id {} outside 1..255", s.station_id));
    }
    if (!seen.insert(s.station_id).second) {
      throw std::invalid_argument(fmt::format("collector: duplicate station id {}", s.station_id));
    }
    if (s.address != "sim" && !parse_endpoint(s.address)) {
      throw std::invalid_argument(fmt::format("collector: bad address '{}' for station {}", s.address, s.station_id));
    }
  }
}

std::string_view to_string(PollFailure f) {
  switch (f) {
    case PollFailure::kTimeout: return "Timeout";
    case PollFailure::kChecksumMismatch: return "ChecksumMismatch";
    case PollFailure::kMalformed: return "Malformed";
  }
  return "?";
}

// ---------------------------------------------------------------------------

StateStore::StateStore(const std::vector<int>& station_ids) {
  for (const int id : station_ids) stations_[id].station_id = id;
}

StationState& StateStore::slot(int station_id) {
  StationState& s = stations_[station_id];
  s.station_id = station_id;
  return s;
}

void StateStore::record_success(int station_id, const protocol::Reading& reading, SimTime rx_time) {
  std::lock_guard lock(mutex_);
  StationState& s = slot(station_id);
  ++s.totals.polls;
  ++s.totals.ok;
  s.consecutive_failures = 0;
  s.last_reading = reading;
  s.last_rx_time = s.last_rx_time ? std::max(*s.last_rx_time, rx_time) : rx_time;
  s.online.add(reading);
}

void StateStore::record_failure(int station_id, PollFailure failure) {
  std::lock_guard lock(mutex_);
  StationState& s = slot(station_id);
  ++s.totals.polls;
  ++s.consecutive_failures;
  switch (failure) {
    case PollFailure::kTimeout: ++s.totals.timeouts; break;
    case PollFailure::kChecksumMismatch: ++s.totals.checksum_errors; break;
    case PollFailure::kMalformed: ++s.totals.other_errors; break;
  }
}

std::vector<StationState> StateStore::snapshot() const {
  std::lock_guard lock(mutex_);
  std::vector<StationState> out;
  out.reserve(stations_.size());
  for (const auto& [id, s] : stations_) out.push_back(s);
  return out;
}

// ---------------------------------------------------------------------------

Transport* TcpLink::connect(Clock& clock, SimTime deadline) {
  if (transport_) return transport_.get();
  const auto remaining = clock.wall_deadline(deadline) - std::chrono::steady_clock::now();
  const auto budget = std::clamp(std::chrono::duration_cast<std::chrono::milliseconds>(remaining),
                                 std::chrono::milliseconds(0), std::chrono::milliseconds(1000));
  transport_ = connect_tcp(endpoint_, budget);
  return transport_.get();
}

namespace {

// One outstanding poll: the request has been written and replies are
// being scanned.
struct PendingPoll {
  PollOutcome outcome;
  Transport* transport = nullptr;
  StationLink* link = nullptr;
  SimTime deadline{};
  protocol::StreamScanner scanner;
  bool done = false;

  void fail(PollFailure failure, std::string detail) {
    outcome.failure = failure;
    outcome.detail = std::move(detail);
    done = true;
  }

  void start(Clock& clock, SimDuration timeout) {
    outcome.sent_at = clock.now();
    deadline = outcome.sent_at + timeout;
    if (link != nullptr) transport = link->connect(clock, deadline);
    if (transport == nullptr) {
      fail(PollFailure::kTimeout, "station unreachable");
      return;
    }
    std::string stale;
    if (transport->read_available(stale) == ReadStatus::kClosed) {
      closed();
      return;
    }
    try {
      transport->write(protocol::encode_poll(outcome.station_id));
    } catch (const TransportClosed& e) {
      closed();
    }
  }

  void closed() {
    if (link != nullptr) link->reset();
    transport = nullptr;
    fail(PollFailure::kMalformed, "transport closed");
  }

  void absorb(Clock& clock) {
    if (done) return;
    std::string bytes;
    const ReadStatus status = transport->read_available(bytes);
    std::vector<protocol::Decoded> items;
    scanner.feed(bytes, items);
    for (const auto& item : items) {
      if (const auto* r = std::get_if<protocol::Reading>(&item)) {
        if (r->station_id != outcome.station_id) continue;
        outcome.reading = *r;
        outcome.received_at = clock.now();
        done = true;
        return;
      }
      if (const auto* err = std::get_if<protocol::ProtocolError>(&item)) {
        fail(err->kind == protocol::ErrorKind::kChecksumMismatch ? PollFailure::kChecksumMismatch
                                                                  : PollFailure::kMalformed,
             fmt::format("{}: {}", protocol::to_string(err->kind), err->detail));
        return;
      }
    }
    if (status == ReadStatus::kClosed) {
      closed();
      return;
    }
    if (clock.now() >= deadline) fail(PollFailure::kTimeout, "no reply before timeout");
  }
};

// Drives `polls` (already started) until each is resolved, calling
// `resolved_prefix` whenever the leading run of finished polls grows.
template <typename OnResolved>
void gather(std::vector<PendingPoll>& polls, Clock& clock, OnResolved&& on_resolved) {
  std::size_t committed = 0;
  auto flush = [&] {
    while (committed < polls.size() && polls[committed].done) on_resolved(polls[committed++].outcome);
  };
  flush();
  std::vector<Transport*> waiting;
  while (committed < polls.size()) {
    waiting.clear();
    SimTime earliest = kSimTimeMax;
    for (const auto& p : polls) {
      if (p.done) continue;
      waiting.push_back(p.transport);
      earliest = std::min(earliest, p.deadline);
    }
    // In-flight polls are not interrupted by shutdown; they finish or time out.
    wait_readable(waiting, clock, earliest);
    for (auto& p : polls) p.absorb(clock);
    flush();
  }
}

}  // namespace

PollOutcome poll_once(int station_id, Transport& transport, Clock& clock, SimDuration timeout) {
  std::vector<PendingPoll> polls(1);
  polls[0].outcome.station_id = station_id;
  polls[0].transport = &transport;
  polls[0].start(clock, timeout);
  PollOutcome result;
  gather(polls, clock, [&](const PollOutcome& o) { result = o; });
  return result;
}

std::string console_line(const protocol::Reading& r, SimTime rx_time) {
  return fmt::format("{} st={} seq={} T={}C RH={}% IRR={}W/m2 WS={}m/s WD={}deg", format_iso8601(rx_time),
                     r.station_id, r.seq, protocol::format_tenths(r.temperature),
                     protocol::format_tenths(r.humidity), r.irradiance, protocol::format_tenths(r.wind_speed),
                     r.wind_dir);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> station_ids(const CollectorConfig& config) {
  std::vector<int> ids;
  for (const auto& s : config.stations) ids.push_back(s.station_id);
  return ids;
}

}  // namespace

Collector::Collector(CollectorConfig config, Clock& clock, logstore::LogStore& log, std::ostream* console)
    : config_(std::move(config)), clock_(clock), log_(log), console_(console), state_(station_ids(config_)) {}

void Collector::attach(int station_id, std::unique_ptr<StationLink> link) { links_[station_id] = std::move(link); }

void Collector::commit(const PollOutcome& outcome) {
  if (!outcome.reading) {
    state_.record_failure(outcome.station_id, outcome.failure);
  } else {
    // Stamped at commit so that the log, the state and any page built at a
    // given instant agree on which readings exist.
    const logstore::LogRecord record{floor_seconds(clock_.now()), *outcome.reading};
    try {
      log_.append(record);
    } catch (const logstore::LogWriteError&) {
      log_.append(record);
    }
    state_.record_success(outcome.station_id, record.reading, record.rx_time);
    if (console_ != nullptr) *console_ << console_line(record.reading, record.rx_time) << '\n' << std::flush;
  }
  if (observer_) observer_(outcome);
}

void Collector::tick() {
  const SimDuration timeout = seconds_to_duration(config_.poll_timeout_s);
  std::vector<PendingPoll> polls(links_.size());
  std::size_t i = 0;
  for (auto& [id, link] : links_) {
    PendingPoll& p = polls[i++];
    p.outcome.station_id = id;
    p.link = link.get();
    p.start(clock_, timeout);
  }
  gather(polls, clock_, [this](const PollOutcome& o) { commit(o); });
}

void Collector::run(std::stop_token stop) {
  const SimTime start = clock_.now();
  const SimDuration interval = seconds_to_duration(config_.poll_interval_s);
  std::int64_t n = 0;
  while (clock_.sleep_until(start + n * interval, stop)) {
    tick();
    ++ticks_;
    ++n;
    const SimDuration behind = clock_.now() - (start + n * interval);
    if (behind >= interval) {
      const std::int64_t skip = behind / interval;
      skipped_ticks_ += static_cast<std::uint64_t>(skip);
      n += skip;
    }
  }
}

}  // namespace wxline::collector
