#include "wxline/page.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

namespace wxline::web {

using logstore::Quantity;

bool is_stale(SimTime rx_time, SimTime at, double poll_interval_s) {
  return at - rx_time > seconds_to_duration(3.0 * poll_interval_s);
}

PageModel make_page_model(SimTime generated_at, double page_interval_s, double poll_interval_s,
                          const std::vector<collector::StationState>& snapshot,
                          const std::vector<logstore::LogRecord>& window_records) {
  PageModel model;
  model.generated_at = generated_at;
  model.refresh_s = static_cast<int>(std::lround(page_interval_s));

  std::map<int, StationView> views;
  for (const auto& s : snapshot) {
    StationView& v = views[s.station_id];
    v.station_id = s.station_id;
    if (s.last_reading && s.last_rx_time) {
      v.latest = logstore::LogRecord{*s.last_rx_time, *s.last_reading};
      v.stale = is_stale(*s.last_rx_time, generated_at, poll_interval_s);
    }
  }
  std::map<int, logstore::StatsAccumulator> acc;
  for (const auto& rec : window_records) {
    views[rec.reading.station_id].station_id = rec.reading.station_id;
    acc[rec.reading.station_id].add(rec.reading);
  }
  const SimTime from = generated_at - kPageWindow;
  for (auto& [id, v] : views) {
    v.window = acc[id].finish(from, generated_at);
    model.stations.push_back(v);
  }
  return model;
}

namespace {

constexpr const char* kStyle =
    "body{font-family:sans-serif;margin:2em;color:#222}"
    "table{border-collapse:collapse;margin-bottom:1.5em}"
    "th,td{border:1px solid #999;padding:0.3em 0.7em;text-align:right}"
    "th{background:#e8eef4}td.nodata{text-align:center;color:#777}"
    ".stale{color:#b00}";

void current_row(std::string& out, const StationView& v) {
  if (!v.latest) {
    fmt::format_to(std::back_inserter(out), "<tr><td>{}</td><td class=\"nodata\" colspan=\"7\">no data</td></tr>\n",
                   v.station_id);
    return;
  }
  const auto& r = v.latest->reading;
  fmt::format_to(std::back_inserter(out),
                 "<tr><td>{}</td><td><time datetime=\"{}\">{}</time></td><td>{}</td><td>{}</td><td>{}</td>"
                 "<td>{}</td><td>{}</td><td{}>{}</td></tr>\n",
                 v.station_id, format_iso8601(v.latest->rx_time), format_iso8601(v.latest->rx_time),
                 protocol::format_tenths(r.temperature), protocol::format_tenths(r.humidity), r.irradiance,
                 protocol::format_tenths(r.wind_speed), r.wind_dir, v.stale ? " class=\"stale\"" : "",
                 v.stale ? "stale" : "ok");
}

void window_rows(std::string& out, const StationView& v) {
  if (v.window.count == 0) {
    fmt::format_to(std::back_inserter(out), "<tr><td>{}</td><td class=\"nodata\" colspan=\"5\">no data</td></tr>\n",
                   v.station_id);
    return;
  }
  for (const Quantity q : logstore::kAllQuantities) {
    const auto& s = *v.window[q];
    fmt::format_to(std::back_inserter(out),
                   "<tr><td>{}</td><td>{} ({})</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>\n",
                   v.station_id, logstore::quantity_label(q), logstore::quantity_unit(q), v.window.count,
                   logstore::format_quantity(q, s.min), logstore::format_quantity(q, s.max),
                   logstore::format_quantity(q, s.mean));
  }
}

}  // namespace

std::string render_page(const PageModel& model) {
  std::string out;
  out.reserve(4096);
  const std::string generated = format_iso8601(model.generated_at);
  fmt::format_to(std::back_inserter(out),
                 "<!DOCTYPE html>\n"
                 "<html lang=\"en\">\n"
                 "<head>\n"
                 "<meta charset=\"utf-8\">\n"
                 "<meta http-equiv=\"refresh\" content=\"{}\">\n"
                 "<title>Meteorological station</title>\n"
                 "<style>{}</style>\n"
                 "</head>\n"
                 "<body>\n"
                 "<h1>Meteorological station</h1>\n"
                 "<p>Generated <time datetime=\"{}\">{}</time></p>\n",
                 model.refresh_s, kStyle, generated, generated);

  out +=
      "<h2>Current conditions</h2>\n"
      "<table id=\"current\">\n"
      "<thead><tr><th>Station</th><th>Received (UTC)</th><th>Temperature (°C)</th><th>Humidity (%)</th>"
      "<th>Solar irradiance (W/m²)</th><th>Wind speed (m/s)</th><th>Wind direction (°)</th><th>Status</th>"
      "</tr></thead>\n<tbody>\n";
  if (model.stations.empty()) out += "<tr><td class=\"nodata\" colspan=\"8\">no data</td></tr>\n";
  for (const auto& v : model.stations) current_row(out, v);
  out += "</tbody>\n</table>\n";

  out +=
      "<h2>Last 24 hours</h2>\n"
      "<table id=\"window\">\n"
      "<thead><tr><th>Station</th><th>Quantity</th><th>Samples</th><th>Min</th><th>Max</th><th>Mean</th>"
      "</tr></thead>\n<tbody>\n";
  if (model.stations.empty()) out += "<tr><td class=\"nodata\" colspan=\"6\">no data</td></tr>\n";
  for (const auto& v : model.stations) window_rows(out, v);
  out += "</tbody>\n</table>\n</body>\n</html>\n";
  return out;
}

}  // namespace wxline::web
