#include "wxline/protocol.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace wxline::protocol {

Tenths Tenths::from_value(double value) {
  return Tenths(static_cast<std::int32_t>(std::lround(value * 10.0)));
}

Reading make_reading(int station_id, int seq, double temperature_c, double humidity_pct,
                     int irradiance_wm2, double wind_speed_ms, int wind_dir_deg) {
  Reading r;
  r.station_id = station_id;
  r.seq = seq;
  r.temperature = Tenths::from_value(temperature_c);
  r.humidity = Tenths::from_value(humidity_pct);
  r.irradiance = irradiance_wm2;
  r.wind_speed = Tenths::from_value(wind_speed_ms);
  r.wind_dir = wind_dir_deg;
  return r;
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIncomplete: return "Incomplete";
    case ErrorKind::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::kBadFieldCount: return "BadFieldCount";
    case ErrorKind::kRangeError: return "RangeError";
    case ErrorKind::kUnknownKind: return "UnknownKind";
  }
  return "?";
}

std::optional<std::string> validate(const Reading& r) {
  if (r.station_id < kMinStationId || r.station_id > kMaxStationId) {
    return fmt::format("station_id {} outside {}..{}", r.station_id, kMinStationId, kMaxStationId);
  }
  if (r.seq < 0 || r.seq >= kSeqModulus) return fmt::format("seq {} outside 0..9999", r.seq);
  if (r.temperature < kMinTemperature || r.temperature > kMaxTemperature) {
    return fmt::format("temperature {} outside -40.0..60.0", format_tenths(r.temperature));
  }
  if (r.humidity < Tenths{} || r.humidity > kMaxHumidity) {
    return fmt::format("humidity {} outside 0.0..100.0", format_tenths(r.humidity));
  }
  if (r.irradiance < 0 || r.irradiance > kMaxIrradiance) {
    return fmt::format("irradiance {} outside 0..1500", r.irradiance);
  }
  if (r.wind_speed < Tenths{} || r.wind_speed > kMaxWindSpeed) {
    return fmt::format("wind speed {} outside 0.0..75.0", format_tenths(r.wind_speed));
  }
  if (r.wind_dir < 0 || r.wind_dir > kMaxWindDirection) {
    return fmt::format("wind direction {} outside 0..359", r.wind_dir);
  }
  return std::nullopt;
}

std::uint8_t checksum(std::string_view payload) {
  std::uint8_t x = 0;
  for (const char c : payload) x ^= static_cast<std::uint8_t>(c);
  return x;
}

namespace {

std::string frame(std::string_view payload) {
  return fmt::format("${}*{:02X}\r\n", payload, checksum(payload));
}

ProtocolError error(ErrorKind kind, std::string detail) { return ProtocolError{kind, std::move(detail)}; }

std::optional<std::uint8_t> parse_hex_byte(std::string_view hh) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  const int hi = nibble(hh[0]);
  const int lo = nibble(hh[1]);
  if (hi < 0 || lo < 0) return std::nullopt;
  return static_cast<std::uint8_t>(hi * 16 + lo);
}

std::vector<std::string_view> split_fields(std::string_view payload) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = payload.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(payload.substr(start));
      return fields;
    }
    fields.push_back(payload.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<int> parse_station(std::string_view text) {
  auto v = parse_unsigned(text);
  if (!v || *v < kMinStationId || *v > kMaxStationId) return std::nullopt;
  return v;
}

Decoded decode_measurement(const std::vector<std::string_view>& f) {
  if (f.size() != 8) {
    return error(ErrorKind::kBadFieldCount, fmt::format("WX frame has {} fields, expected 8", f.size()));
  }
  Reading r;
  auto bad = [](std::string_view name, std::string_view text) {
    return error(ErrorKind::kRangeError, fmt::format("malformed {} field '{}'", name, text));
  };
  const auto station = parse_unsigned(f[1]);
  if (!station) return bad("station", f[1]);
  r.station_id = *station;
  if (f[2].size() != 4) return bad("seq", f[2]);
  int seq = 0;
  for (const char c : f[2]) {
    if (c < '0' || c > '9') return bad("seq", f[2]);
    seq = seq * 10 + (c - '0');
  }
  r.seq = seq;
  const auto temp = parse_tenths(f[3]);
  if (!temp) return bad("temperature", f[3]);
  r.temperature = *temp;
  const auto rh = parse_tenths(f[4]);
  if (!rh) return bad("humidity", f[4]);
  r.humidity = *rh;
  const auto irr = parse_unsigned(f[5]);
  if (!irr) return bad("irradiance", f[5]);
  r.irradiance = *irr;
  const auto ws = parse_tenths(f[6]);
  if (!ws) return bad("wind speed", f[6]);
  r.wind_speed = *ws;
  const auto wd = parse_unsigned(f[7]);
  if (!wd) return bad("wind direction", f[7]);
  r.wind_dir = *wd;
  if (auto why = validate(r)) return error(ErrorKind::kRangeError, *why);
  return r;
}

}  // namespace

std::string format_tenths(Tenths v) {
  const std::int32_t raw = v.raw();
  const std::int64_t mag = raw < 0 ? -static_cast<std::int64_t>(raw) : raw;
  return fmt::format("{}{}.{}", raw < 0 ? "-" : "", mag / 10, mag % 10);
}

std::optional<int> parse_unsigned(std::string_view text) {
  // Canonical decimal only: no sign, no leading zeros, at most 9 digits.
  if (text.empty() || text.size() > 9) return std::nullopt;
  if (text.size() > 1 && text[0] == '0') return std::nullopt;
  int value = 0;
  for (const char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return value;
}

std::optional<Tenths> parse_tenths(std::string_view text) {
  // -?(0|[1-9][0-9]*)\.[0-9]
  bool negative = false;
  if (!text.empty() && text.front() == '-') {
    negative = true;
    text.remove_prefix(1);
  }
  if (text.size() < 3 || text[text.size() - 2] != '.') return std::nullopt;
  const char frac = text.back();
  if (frac < '0' || frac > '9') return std::nullopt;
  const auto whole = parse_unsigned(text.substr(0, text.size() - 2));
  if (!whole || *whole > 100'000'000) return std::nullopt;
  const std::int32_t raw = *whole * 10 + (frac - '0');
  if (negative && raw == 0) return std::nullopt;  // "-0.0" is not canonical
  return Tenths::from_raw(negative ? -raw : raw);
}

std::string encode_poll(int station_id) {
  if (station_id < kMinStationId || station_id > kMaxStationId) {
    throw std::invalid_argument(fmt::format("station_id {} outside {}..{}", station_id,
                                            kMinStationId, kMaxStationId));
  }
  return frame(fmt::format("RQ,{}", station_id));
}

std::string encode_measurement(const Reading& r) {
  if (auto why = validate(r)) throw std::invalid_argument(*why);
  return frame(fmt::format("WX,{},{:04d},{},{},{},{},{}", r.station_id, r.seq,
                           format_tenths(r.temperature), format_tenths(r.humidity), r.irradiance,
                           format_tenths(r.wind_speed), r.wind_dir));
}

Decoded decode_frame(std::string_view line) {
  if (line.size() < 2 || line.substr(line.size() - 2) != "\r\n") {
    return error(ErrorKind::kIncomplete, "missing CR LF terminator");
  }
  if (line.front() != '$') return error(ErrorKind::kIncomplete, "missing '$' start delimiter");
  const std::string_view body = line.substr(1, line.size() - 3);
  const auto star = body.find('*');
  if (star == std::string_view::npos) return error(ErrorKind::kIncomplete, "missing '*' checksum delimiter");
  if (body.size() - star - 1 != 2) {
    return error(ErrorKind::kIncomplete, fmt::format("checksum field has {} characters", body.size() - star - 1));
  }
  const std::string_view payload = body.substr(0, star);
  if (payload.find_first_of("$\r\n") != std::string_view::npos) {
    return error(ErrorKind::kIncomplete, "framing byte inside payload");
  }
  const auto sent = parse_hex_byte(body.substr(star + 1));
  if (!sent) return error(ErrorKind::kChecksumMismatch, "checksum is not two uppercase hex digits");
  const std::uint8_t actual = checksum(payload);
  if (*sent != actual) {
    return error(ErrorKind::kChecksumMismatch,
                 fmt::format("checksum {:02X} does not match payload ({:02X})", *sent, actual));
  }

  const auto fields = split_fields(payload);
  if (fields[0] == "WX") return decode_measurement(fields);
  if (fields[0] == "RQ") {
    if (fields.size() != 2) {
      return error(ErrorKind::kBadFieldCount, fmt::format("RQ frame has {} fields, expected 2", fields.size()));
    }
    const auto station = parse_station(fields[1]);
    if (!station) return error(ErrorKind::kRangeError, fmt::format("bad station id '{}'", fields[1]));
    return Poll{*station};
  }
  return error(ErrorKind::kUnknownKind, fmt::format("unknown payload kind '{}'", fields[0]));
}

void StreamScanner::reset() {
  in_frame_ = false;
  garbage_ = 0;
  frame_.clear();
}

void StreamScanner::feed(std::string_view bytes, std::vector<Decoded>& out) {
  for (const char c : bytes) {
    if (!in_frame_) {
      if (c != '$') {
        ++garbage_;
        continue;
      }
      if (garbage_ > 0) {
        out.emplace_back(error(ErrorKind::kIncomplete,
                               fmt::format("discarded {} bytes before start delimiter", garbage_)));
        garbage_ = 0;
      }
      in_frame_ = true;
      frame_.assign(1, '$');
      continue;
    }
    if (c == '$') {
      out.emplace_back(error(ErrorKind::kIncomplete,
                             fmt::format("frame interrupted after {} bytes", frame_.size())));
      frame_.assign(1, '$');
      continue;
    }
    frame_.push_back(c);
    if (c == '\n') {
      out.push_back(decode_frame(frame_));
      frame_.clear();
      in_frame_ = false;
    } else if (frame_.size() >= kMaxFrameLength) {
      out.emplace_back(error(ErrorKind::kIncomplete,
                             fmt::format("frame exceeds {} bytes without terminator", kMaxFrameLength)));
      frame_.clear();
      in_frame_ = false;
    }
  }
}

}  // namespace wxline::protocol
