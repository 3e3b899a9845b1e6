#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wxline/logstore.hpp"
#include "wxline/timefmt.hpp"

namespace wxline::cli {

struct ReplayOptions {
  // Stations shown even without data (the collector's configured set).
  std::vector<int> stations;
  double poll_interval_s = 10;
  double page_interval_s = 300;
  // Last regeneration instant considered; defaults to the last record.
  std::optional<SimTime> until;
  // Station seconds per wall second; infinity replays without pacing.
  double speed = 0;
};

struct ReplayResult {
  std::string final_page;
  SimTime final_generated_at{};
  std::size_t pages = 0;
  std::size_t records = 0;
  std::size_t malformed = 0;
};

// Feeds the logged readings, in order, into a fresh state store and
// renders the page at every regeneration boundary a live collector would
// have used, yielding the same page sequence. With no boundary in range
// the result is the "no data" page. Throws std::invalid_argument when
// speed is not positive.
ReplayResult replay_log(const logstore::LogStore& log, const ReplayOptions& options,
                        const std::function<void(SimTime, const std::string&)>& on_page = {});

}  // namespace wxline::cli
