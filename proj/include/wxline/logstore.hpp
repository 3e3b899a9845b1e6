// Append-only CSV log of received readings, one file per UTC day
// (`wx-YYYY-MM-DD.csv`), plus windowed aggregation.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wxline/protocol.hpp"
#include "wxline/timefmt.hpp"

namespace wxline::logstore {

inline constexpr std::string_view kCsvHeader = "rx_time,station_id,seq,temp_c,rh_pct,irr_wm2,wind_ms,wind_deg";

struct LogRecord {
  SimTime rx_time;  // whole seconds, UTC
  protocol::Reading reading;

  bool operator==(const LogRecord&) const = default;
};

// Renders one CSV line without the trailing newline.
std::string render_csv(const LogRecord& record);
std::optional<LogRecord> parse_csv(std::string_view line);

std::string day_file_name(SimTime t);

class LogWriteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LogReadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReadResult {
  std::vector<LogRecord> records;
  std::size_t malformed = 0;
};

class LogStore {
 public:
  // With `durable`, every append is followed by fdatasync.
  explicit LogStore(std::filesystem::path directory, bool durable = true);
  ~LogStore();
  LogStore(const LogStore&) = delete;
  LogStore& operator=(const LogStore&) = delete;

  const std::filesystem::path& directory() const { return directory_; }

  // Writes exactly one line with a single write(2) on an O_APPEND
  // descriptor; a new day file gets the header in the same write.
  // Throws LogWriteError.
  void append(const LogRecord& record);

  // Records with from <= rx_time < to in file order, optionally for one
  // station. A missing directory or day file reads as empty. An
  // unterminated final line is an append in progress and is not counted.
  // Throws LogReadError when an existing file cannot be read.
  ReadResult read_range(SimTime from, SimTime to, std::optional<int> station = std::nullopt) const;

  // Every record in every day file, oldest file first.
  ReadResult read_all(std::optional<int> station = std::nullopt) const;

  // Releases the open day-file descriptor.
  void close();

 private:
  void read_file(const std::filesystem::path& path, SimTime from, SimTime to, std::optional<int> station,
                 ReadResult& out) const;

  std::filesystem::path directory_;
  bool durable_;
  std::mutex mutex_;
  int fd_ = -1;
  std::string open_day_;
};

// min / max / mean of one quantity, in physical units.
struct QuantityStats {
  double min = 0;
  double max = 0;
  double mean = 0;  // full precision; see display_mean

  bool operator==(const QuantityStats&) const = default;
};

enum class Quantity { kTemperature, kHumidity, kIrradiance, kWindSpeed, kWindDirection };
inline constexpr Quantity kAllQuantities[] = {Quantity::kTemperature, Quantity::kHumidity, Quantity::kIrradiance,
                                              Quantity::kWindSpeed, Quantity::kWindDirection};

std::string_view quantity_name(Quantity q);   // CSV column name, e.g. temp_c
std::string_view quantity_label(Quantity q);  // human label
std::string_view quantity_unit(Quantity q);
int quantity_decimals(Quantity q);

// Formats a value at the quantity's wire precision.
std::string format_quantity(Quantity q, double value);

struct AggregateStats {
  std::size_t count = 0;
  SimTime from{};
  SimTime to{};
  // Empty when count == 0. Wind direction is averaged arithmetically.
  std::optional<QuantityStats> stats[5];

  const std::optional<QuantityStats>& operator[](Quantity q) const { return stats[static_cast<int>(q)]; }
  bool operator==(const AggregateStats&) const = default;
};

// Exact integer accumulation at wire precision; usable online (collector)
// and offline (log reads) with identical results.
class StatsAccumulator {
 public:
  void add(const protocol::Reading& r);
  std::size_t count() const { return count_; }
  AggregateStats finish(SimTime from, SimTime to) const;

  bool operator==(const StatsAccumulator&) const = default;

 private:
  struct Column {
    std::int64_t sum = 0;
    std::int32_t min = 0;
    std::int32_t max = 0;
    bool operator==(const Column&) const = default;
  };
  std::size_t count_ = 0;
  Column columns_[5];
};

AggregateStats aggregate(const std::vector<LogRecord>& records, SimTime from, SimTime to);

}  // namespace wxline::logstore
