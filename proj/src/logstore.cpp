#include "wxline/logstore.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <system_error>

#include <fmt/format.h>

namespace wxline::logstore {

namespace fs = std::filesystem;

std::string render_csv(const LogRecord& rec) {
  const auto& r = rec.reading;
  return fmt::format("{},{},{},{},{},{},{},{}", format_iso8601(rec.rx_time), r.station_id, r.seq,
                     protocol::format_tenths(r.temperature), protocol::format_tenths(r.humidity), r.irradiance,
                     protocol::format_tenths(r.wind_speed), r.wind_dir);
}

std::optional<LogRecord> parse_csv(std::string_view line) {
  std::string_view f[8];
  std::size_t n = 0;
  while (true) {
    const auto comma = line.find(',');
    if (n == 8) return std::nullopt;
    f[n++] = line.substr(0, comma);
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  if (n != 8) return std::nullopt;

  LogRecord rec;
  const auto rx = parse_iso8601(f[0]);
  const auto station = protocol::parse_unsigned(f[1]);
  const auto seq = protocol::parse_unsigned(f[2]);
  const auto temp = protocol::parse_tenths(f[3]);
  const auto rh = protocol::parse_tenths(f[4]);
  const auto irr = protocol::parse_unsigned(f[5]);
  const auto ws = protocol::parse_tenths(f[6]);
  const auto wd = protocol::parse_unsigned(f[7]);
  if (!rx || !station || !seq || !temp || !rh || !irr || !ws || !wd) return std::nullopt;
  rec.rx_time = *rx;
  rec.reading = protocol::Reading{*station, *seq, *temp, *rh, *irr, *ws, *wd};
  if (protocol::validate(rec.reading)) return std::nullopt;
  return rec;
}

std::string day_file_name(SimTime t) { return fmt::format("wx-{}.csv", format_date(t)); }

namespace {

// Day-file date of `name`, or nullopt if it is not a day file.
std::optional<SimTime> day_of_file(const std::string& name) {
  if (name.size() != 17 || name.rfind("wx-", 0) != 0 || name.substr(13) != ".csv") return std::nullopt;
  return parse_iso8601(name.substr(3, 10) + "T00:00:00Z");
}

std::vector<std::pair<SimTime, fs::path>> list_day_files(const fs::path& dir) {
  std::vector<std::pair<SimTime, fs::path>> files;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (auto day = day_of_file(entry.path().filename().string())) files.emplace_back(*day, entry.path());
  }
  if (ec) throw LogReadError(fmt::format("cannot list {}: {}", dir.string(), ec.message()));
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

LogStore::LogStore(fs::path directory, bool durable) : directory_(std::move(directory)), durable_(durable) {}

LogStore::~LogStore() { close(); }

void LogStore::close() {
  std::lock_guard lock(mutex_);
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  open_day_.clear();
}

void LogStore::append(const LogRecord& record) {
  if (auto why = protocol::validate(record.reading)) throw LogWriteError("invalid record: " + *why);
  std::lock_guard lock(mutex_);
  const std::string day = format_date(record.rx_time);
  if (fd_ < 0 || day != open_day_) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
    std::error_code ec;
    fs::create_directories(directory_, ec);
    const fs::path path = directory_ / day_file_name(record.rx_time);
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw LogWriteError(fmt::format("open {}: {}", path.string(), std::strerror(errno)));
    open_day_ = day;
  }

  std::string text;
  struct stat st {};
  if (::fstat(fd_, &st) == 0 && st.st_size == 0) {
    text.append(kCsvHeader);
    text.push_back('\n');
  }
  text += render_csv(record);
  text.push_back('\n');

  const ssize_t n = ::write(fd_, text.data(), text.size());
  if (n != static_cast<ssize_t>(text.size())) {
    const int err = n < 0 ? errno : EIO;
    // Drop the descriptor so a retry reopens the file.
    ::close(fd_);
    fd_ = -1;
    open_day_.clear();
    throw LogWriteError(fmt::format("append to {}: {}", day_file_name(record.rx_time), std::strerror(err)));
  }
  if (durable_ && ::fdatasync(fd_) != 0) {
    throw LogWriteError(fmt::format("fdatasync: {}", std::strerror(errno)));
  }
}

void LogStore::read_file(const fs::path& path, SimTime from, SimTime to, std::optional<int> station,
                         ReadResult& out) const {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::error_code ec;
    if (!fs::exists(path, ec)) return;
    throw LogReadError("cannot open " + path.string());
  }
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw LogReadError("cannot read " + path.string());

  std::string_view rest(content);
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    if (nl == std::string_view::npos) break;  // append in progress
    const std::string_view line = rest.substr(0, nl);
    rest.remove_prefix(nl + 1);
    if (line == kCsvHeader) continue;
    const auto rec = parse_csv(line);
    if (!rec) {
      ++out.malformed;
      continue;
    }
    if (rec->rx_time < from || rec->rx_time >= to) continue;
    if (station && rec->reading.station_id != *station) continue;
    out.records.push_back(*rec);
  }
}

ReadResult LogStore::read_range(SimTime from, SimTime to, std::optional<int> station) const {
  ReadResult out;
  if (!(from < to)) return out;
  for (const auto& [day, path] : list_day_files(directory_)) {
    // Comparing file spans avoids flooring `from`, which overflows near SimTime::min().
    const SimTime start = std::chrono::time_point_cast<SimDuration>(day);
    if (start + std::chrono::days(1) <= from || start >= to) continue;
    read_file(path, from, to, station, out);
  }
  return out;
}

ReadResult LogStore::read_all(std::optional<int> station) const {
  ReadResult out;
  for (const auto& [day, path] : list_day_files(directory_)) {
    read_file(path, SimTime::min(), SimTime::max(), station, out);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view quantity_name(Quantity q) {
  switch (q) {
    case Quantity::kTemperature: return "temp_c";
    case Quantity::kHumidity: return "rh_pct";
    case Quantity::kIrradiance: return "irr_wm2";
    case Quantity::kWindSpeed: return "wind_ms";
    case Quantity::kWindDirection: return "wind_deg";
  }
  return "?";
}

std::string_view quantity_label(Quantity q) {
  switch (q) {
    case Quantity::kTemperature: return "Temperature";
    case Quantity::kHumidity: return "Humidity";
    case Quantity::kIrradiance: return "Solar irradiance";
    case Quantity::kWindSpeed: return "Wind speed";
    case Quantity::kWindDirection: return "Wind direction";
  }
  return "?";
}

std::string_view quantity_unit(Quantity q) {
  switch (q) {
    case Quantity::kTemperature: return "°C";
    case Quantity::kHumidity: return "%";
    case Quantity::kIrradiance: return "W/m²";
    case Quantity::kWindSpeed: return "m/s";
    case Quantity::kWindDirection: return "°";
  }
  return "";
}

int quantity_decimals(Quantity q) {
  return q == Quantity::kIrradiance || q == Quantity::kWindDirection ? 0 : 1;
}

std::string format_quantity(Quantity q, double value) {
  if (quantity_decimals(q) == 0) return fmt::format("{}", std::lround(value));
  return protocol::format_tenths(protocol::Tenths::from_value(value));
}

namespace {

std::int32_t raw_value(const protocol::Reading& r, Quantity q) {
  switch (q) {
    case Quantity::kTemperature: return r.temperature.raw();
    case Quantity::kHumidity: return r.humidity.raw();
    case Quantity::kIrradiance: return r.irradiance;
    case Quantity::kWindSpeed: return r.wind_speed.raw();
    case Quantity::kWindDirection: return r.wind_dir;
  }
  return 0;
}

}  // namespace

void StatsAccumulator::add(const protocol::Reading& r) {
  for (const Quantity q : kAllQuantities) {
    Column& c = columns_[static_cast<int>(q)];
    const std::int32_t v = raw_value(r, q);
    c.sum += v;
    c.min = count_ == 0 ? v : std::min(c.min, v);
    c.max = count_ == 0 ? v : std::max(c.max, v);
  }
  ++count_;
}

AggregateStats StatsAccumulator::finish(SimTime from, SimTime to) const {
  AggregateStats out;
  out.count = count_;
  out.from = from;
  out.to = to;
  if (count_ == 0) return out;
  for (const Quantity q : kAllQuantities) {
    const Column& c = columns_[static_cast<int>(q)];
    const double scale = quantity_decimals(q) == 0 ? 1.0 : 10.0;
    out.stats[static_cast<int>(q)] = QuantityStats{c.min / scale, c.max / scale,
                                                   static_cast<double>(c.sum) / static_cast<double>(count_) / scale};
  }
  return out;
}

AggregateStats aggregate(const std::vector<LogRecord>& records, SimTime from, SimTime to) {
  StatsAccumulator acc;
  for (const auto& rec : records) acc.add(rec.reading);
  return acc.finish(from, to);
}

}  // namespace wxline::logstore
