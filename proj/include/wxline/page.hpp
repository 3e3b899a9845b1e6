// Station web page: model construction and deterministic HTML rendering.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wxline/collector.hpp"
#include "wxline/logstore.hpp"

namespace wxline::web {

inline constexpr SimDuration kPageWindow = std::chrono::hours(24);

struct StationView {
  int station_id = 0;
  std::optional<logstore::LogRecord> latest;
  bool stale = true;
  logstore::AggregateStats window;  // last 24 h

  bool operator==(const StationView&) const = default;
};

struct PageModel {
  SimTime generated_at{};
  int refresh_s = 300;
  std::vector<StationView> stations;  // ascending station id

  bool operator==(const PageModel&) const = default;
};

// A reading is stale when it is more than three poll intervals old.
bool is_stale(SimTime rx_time, SimTime at, double poll_interval_s);

// Builds the page from a state snapshot and the log records of
// [generated_at - 24 h, generated_at). Stations appear if they are in the
// snapshot or in the records.
PageModel make_page_model(SimTime generated_at, double page_interval_s, double poll_interval_s,
                          const std::vector<collector::StationState>& snapshot,
                          const std::vector<logstore::LogRecord>& window_records);

std::string render_page(const PageModel& model);

}  // namespace wxline::web
