// Shared test helpers and independent oracles.

#pragma once

#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "wxline/protocol.hpp"
#include "wxline/timefmt.hpp"

namespace wxline::testing {

class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "wxline-test-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const std::filesystem::path& p, std::string_view content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

// Checksum oracle kept deliberately apart from the library: a plain loop
// over unsigned bytes and snprintf for the hex digits.
inline unsigned oracle_xor(std::string_view payload) {
  unsigned acc = 0;
  for (unsigned char c : payload) acc ^= c;
  return acc;
}

inline std::string oracle_frame(std::string_view payload) {
  char hex[3];
  std::snprintf(hex, sizeof hex, "%02X", oracle_xor(payload));
  return "$" + std::string(payload) + "*" + hex + "\r\n";
}

inline SimTime at_utc(std::string_view iso) {
  const auto t = parse_iso8601(iso);
  if (!t) throw std::invalid_argument("bad test time " + std::string(iso));
  return *t;
}

inline protocol::Reading random_reading(std::mt19937_64& rng) {
  auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  protocol::Reading r;
  r.station_id = pick(1, 255);
  r.seq = pick(0, 9999);
  r.temperature = protocol::Tenths::from_raw(pick(-400, 600));
  r.humidity = protocol::Tenths::from_raw(pick(0, 1000));
  r.irradiance = pick(0, 1500);
  r.wind_speed = protocol::Tenths::from_raw(pick(0, 750));
  r.wind_dir = pick(0, 359);
  return r;
}

}  // namespace wxline::testing
