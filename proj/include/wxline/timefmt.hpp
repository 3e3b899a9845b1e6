#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace wxline {

// Simulation and collector time. Microsecond resolution keeps virtual-time
// arithmetic exact; persisted timestamps are truncated to whole seconds.
using SimDuration = std::chrono::microseconds;
using SimTime = std::chrono::sys_time<SimDuration>;

inline constexpr SimTime kSimTimeMax = SimTime::max();

SimDuration seconds_to_duration(double seconds);
double duration_to_seconds(SimDuration d);

// Largest whole second not after `t`.
SimTime floor_seconds(SimTime t);

// Renders `YYYY-MM-DDTHH:MM:SSZ` (sub-second part dropped).
std::string format_iso8601(SimTime t);

// Accepts `YYYY-MM-DDTHH:MM:SSZ` or the same with a `+00:00` suffix.
// Anything else, including impossible calendar dates, yields nullopt.
std::optional<SimTime> parse_iso8601(std::string_view text);

// `YYYY-MM-DD` of the UTC day containing `t`.
std::string format_date(SimTime t);

}  // namespace wxline
