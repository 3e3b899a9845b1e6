// Line protocol between a sensor node and the collector.
//
// Every frame is printable ASCII:
//
//   '$' payload '*' HH CR LF
//
// where HH is the XOR of all payload bytes as two uppercase hex digits.
// Two payload kinds exist:
//
//   RQ,<station>                                  collector -> node poll
//   WX,<station>,<seq4>,<T>,<RH>,<IRR>,<WS>,<WD>  node -> collector reading
//
// See docs/wire-format.md for the full grammar.

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace wxline::protocol {

// A quantity carried at one-decimal wire precision, stored as an integer
// count of tenths so that encoding and decoding are exact.
class Tenths {
 public:
  constexpr Tenths() = default;
  static constexpr Tenths from_raw(std::int32_t raw) { return Tenths(raw); }
  // Rounds half away from zero.
  static Tenths from_value(double value);

  constexpr std::int32_t raw() const { return raw_; }
  constexpr double value() const { return raw_ / 10.0; }

  constexpr auto operator<=>(const Tenths&) const = default;

 private:
  constexpr explicit Tenths(std::int32_t raw) : raw_(raw) {}
  std::int32_t raw_ = 0;
};

inline constexpr int kMinStationId = 1;
inline constexpr int kMaxStationId = 255;
inline constexpr int kSeqModulus = 10000;

inline constexpr Tenths kMinTemperature = Tenths::from_raw(-400);
inline constexpr Tenths kMaxTemperature = Tenths::from_raw(600);
inline constexpr Tenths kMaxHumidity = Tenths::from_raw(1000);
inline constexpr int kMaxIrradiance = 1500;
inline constexpr Tenths kMaxWindSpeed = Tenths::from_raw(750);
inline constexpr int kMaxWindDirection = 359;

struct Reading {
  int station_id = kMinStationId;
  int seq = 0;
  Tenths temperature;   // degrees Celsius
  Tenths humidity;      // percent relative humidity
  int irradiance = 0;   // W/m2
  Tenths wind_speed;    // m/s
  int wind_dir = 0;     // degrees clockwise from north

  bool operator==(const Reading&) const = default;
};

// Convenience constructor from physical values; rounds to wire precision.
Reading make_reading(int station_id, int seq, double temperature_c, double humidity_pct,
                     int irradiance_wm2, double wind_speed_ms, int wind_dir_deg);

struct Poll {
  int station_id = kMinStationId;
  bool operator==(const Poll&) const = default;
};

enum class ErrorKind { kIncomplete, kChecksumMismatch, kBadFieldCount, kRangeError, kUnknownKind };

std::string_view to_string(ErrorKind kind);

struct ProtocolError {
  ErrorKind kind;
  std::string detail;
};

using Decoded = std::variant<Poll, Reading, ProtocolError>;

// First violated range invariant, if any.
std::optional<std::string> validate(const Reading& r);

std::uint8_t checksum(std::string_view payload);

// Throw std::invalid_argument when an argument breaks a range invariant.
std::string encode_poll(int station_id);
std::string encode_measurement(const Reading& r);

// Inverse of the encoders. The checksum is verified before any field is
// parsed; ranges are validated after parsing.
Decoded decode_frame(std::string_view line);

// Wire-precision text helpers shared with the CSV log.
std::string format_tenths(Tenths v);
std::optional<Tenths> parse_tenths(std::string_view text);
std::optional<int> parse_unsigned(std::string_view text);

// Incremental frame extractor. Feed bytes in any chunking; the emitted
// sequence depends only on the concatenated input. Bytes outside a frame
// are discarded and reported as one kIncomplete error per discarded run,
// emitted when the next '$' is seen.
class StreamScanner {
 public:
  static constexpr std::size_t kMaxFrameLength = 96;

  void feed(std::string_view bytes, std::vector<Decoded>& out);

  // Bytes of a frame that has started but not yet terminated.
  std::string_view pending() const { return frame_; }
  void reset();

 private:
  bool in_frame_ = false;
  std::size_t garbage_ = 0;
  std::string frame_;
};

}  // namespace wxline::protocol
