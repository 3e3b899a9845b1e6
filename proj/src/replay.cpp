#include "wxline/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "wxline/collector.hpp"
#include "wxline/page.hpp"
#include "wxline/webserver.hpp"

namespace wxline::cli {

ReplayResult replay_log(const logstore::LogStore& log, const ReplayOptions& options,
                        const std::function<void(SimTime, const std::string&)>& on_page) {
  if (!(options.speed > 0)) throw std::invalid_argument("replay speed must be positive");
  const SimDuration interval = seconds_to_duration(options.page_interval_s);
  if (interval <= SimDuration::zero()) throw std::invalid_argument("page interval must be positive");

  auto read = log.read_all();
  auto& records = read.records;
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return a.rx_time < b.rx_time; });

  ReplayResult result;
  result.records = records.size();
  result.malformed = read.malformed;

  collector::StateStore state(options.stations);
  if (records.empty()) {
    result.final_generated_at = options.until.value_or(floor_seconds(
        std::chrono::time_point_cast<SimDuration>(std::chrono::system_clock::now())));
    result.final_page = web::render_page(web::make_page_model(result.final_generated_at, options.page_interval_s,
                                                              options.poll_interval_s, state.snapshot(), {}));
    return result;
  }

  const SimTime end = options.until.value_or(records.back().rx_time);
  const bool paced = std::isfinite(options.speed);
  std::size_t fed = 0;
  std::size_t window_begin = 0;
  SimTime previous = records.front().rx_time;
  for (SimTime at = web::next_boundary(records.front().rx_time, interval); at <= end; at += interval) {
    while (fed < records.size() && records[fed].rx_time < at) {
      const auto& rec = records[fed++];
      state.record_success(rec.reading.station_id, rec.reading, rec.rx_time);
    }
    while (window_begin < fed && records[window_begin].rx_time < at - web::kPageWindow) ++window_begin;
    const std::vector<logstore::LogRecord> window(records.begin() + static_cast<std::ptrdiff_t>(window_begin),
                                                  records.begin() + static_cast<std::ptrdiff_t>(fed));

    if (paced) {
      std::this_thread::sleep_for(std::chrono::duration<double>(duration_to_seconds(at - previous) / options.speed));
    }
    previous = at;

    result.final_page = web::render_page(
        web::make_page_model(at, options.page_interval_s, options.poll_interval_s, state.snapshot(), window));
    result.final_generated_at = at;
    ++result.pages;
    if (on_page) on_page(at, result.final_page);
  }

  if (result.pages == 0) {
    result.final_generated_at = records.front().rx_time;
    result.final_page = web::render_page(web::make_page_model(result.final_generated_at, options.page_interval_s,
                                                              options.poll_interval_s, state.snapshot(), {}));
  }
  return result;
}

}  // namespace wxline::cli
