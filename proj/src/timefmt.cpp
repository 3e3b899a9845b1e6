#include "wxline/timefmt.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace wxline {

using namespace std::chrono;

SimDuration seconds_to_duration(double seconds) {
  const double us = std::round(seconds * 1e6);
  if (us >= static_cast<double>(std::numeric_limits<SimDuration::rep>::max())) {
    return SimDuration::max();
  }
  return SimDuration(static_cast<SimDuration::rep>(us));
}

double duration_to_seconds(SimDuration d) { return duration<double>(d).count(); }

SimTime floor_seconds(SimTime t) { return floor<seconds>(t); }

std::string format_iso8601(SimTime t) {
  const auto secs = floor<seconds>(t);
  const auto day = floor<days>(secs);
  const year_month_day ymd{day};
  const hh_mm_ss hms{secs - day};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     hms.hours().count(), hms.minutes().count(), hms.seconds().count());
}

std::string format_date(SimTime t) { return format_iso8601(t).substr(0, 10); }

namespace {

bool read_digits(std::string_view text, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > text.size()) return false;
  int value = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  out = value;
  return true;
}

}  // namespace

std::optional<SimTime> parse_iso8601(std::string_view text) {
  // 0123456789012345678
  // YYYY-MM-DDTHH:MM:SS
  if (text.size() < 20) return std::nullopt;
  const std::string_view suffix = text.substr(19);
  if (suffix != "Z" && suffix != "+00:00") return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!read_digits(text, 0, 4, y) || !read_digits(text, 5, 2, mo) || !read_digits(text, 8, 2, d) ||
      !read_digits(text, 11, 2, h) || !read_digits(text, 14, 2, mi) || !read_digits(text, 17, 2, s)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return SimTime{sys_days{ymd} + hours{h} + minutes{mi} + seconds{s}};
}

}  // namespace wxline
