#include "wxline/nodesim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

namespace wxline::nodesim {

namespace {

// Direction diffusion of the wind walk, degrees per sqrt(second).
constexpr double kWindDirDiffusion = 1.0;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

double gaussian(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

double hour_of_day(SimTime t) {
  const auto since_midnight = t - std::chrono::floor<std::chrono::days>(t);
  return std::chrono::duration<double, std::ratio<3600>>(since_midnight).count();
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void ClimateModel::validate() const {
  require(sunrise_hour >= 0 && sunset_hour <= 24 && sunrise_hour < sunset_hour,
          "climate: need 0 <= sunrise_hour < sunset_hour <= 24");
  require(t_peak_hour >= 0 && t_peak_hour < 24, "climate: t_peak_hour outside [0, 24)");
  require(t_amplitude >= 0 && s_max >= 0 && wind_noise >= 0, "climate: amplitudes must be non-negative");
  require(s_max <= protocol::kMaxIrradiance, "climate: s_max above the 1500 W/m2 sensor range");
  require(wind_mean >= 0 && wind_reversion >= 0, "climate: wind_mean and wind_reversion must be non-negative");
}

Truth diurnal(const ClimateModel& m, SimTime t) {
  const double h = hour_of_day(t);
  Truth out;
  out.temperature_c = m.t_mean + m.t_amplitude * std::cos(2.0 * std::numbers::pi * (h - m.t_peak_hour) / 24.0);
  if (h >= m.sunrise_hour && h <= m.sunset_hour) {
    const double phase = std::numbers::pi * (h - m.sunrise_hour) / (m.sunset_hour - m.sunrise_hour);
    out.irradiance_wm2 = std::max(0.0, m.s_max * std::sin(phase));
  }
  out.humidity_pct = std::clamp(m.rh_base + m.rh_temp_slope * (out.temperature_c - m.t_mean), 0.0, 100.0);
  return out;
}

Weather::Weather(const ClimateModel& model, std::uint64_t stream)
    : model_(model), rng_(make_rng(model.seed, stream, 1)) {
  speed_ = std::clamp(model_.wind_mean, 0.0, protocol::kMaxWindSpeed.value());
  direction_ = std::uniform_real_distribution<double>(0.0, 360.0)(rng_);
}

Truth Weather::at(SimTime t) {
  if (last_ && t > *last_) {
    const double dt = duration_to_seconds(t - *last_);
    const double theta = model_.wind_reversion;
    if (theta > 0) {
      const double decay = std::exp(-theta * dt);
      const double spread = model_.wind_noise * std::sqrt((1.0 - decay * decay) / (2.0 * theta));
      speed_ = model_.wind_mean + (speed_ - model_.wind_mean) * decay + gaussian(rng_, spread);
    } else {
      speed_ += gaussian(rng_, model_.wind_noise * std::sqrt(dt));
    }
    speed_ = std::clamp(speed_, 0.0, protocol::kMaxWindSpeed.value());
    direction_ = std::fmod(direction_ + gaussian(rng_, kWindDirDiffusion * std::sqrt(dt)), 360.0);
    if (direction_ < 0) direction_ += 360.0;
  }
  if (!last_ || t > *last_) last_ = t;

  Truth out = diurnal(model_, t);
  out.wind_speed_ms = speed_;
  out.wind_dir_deg = direction_;
  return out;
}

protocol::Reading sample_sensors(const Truth& truth, const SensorNoise& noise, std::mt19937_64& rng,
                                 int station_id, int seq) {
  using protocol::Tenths;
  auto tenths = [&](double value, double sigma, Tenths lo, Tenths hi) {
    const double noisy = std::clamp(value + gaussian(rng, sigma), lo.value(), hi.value());
    return std::clamp(Tenths::from_value(noisy), lo, hi);
  };

  protocol::Reading r;
  r.station_id = station_id;
  r.seq = seq;
  r.temperature = tenths(truth.temperature_c, noise.temperature_c, protocol::kMinTemperature,
                         protocol::kMaxTemperature);
  r.humidity = tenths(truth.humidity_pct, noise.humidity_pct, Tenths{}, protocol::kMaxHumidity);
  if (truth.irradiance_wm2 > 0) {
    const double irr = truth.irradiance_wm2 + gaussian(rng, noise.irradiance_wm2);
    r.irradiance = static_cast<int>(std::lround(std::clamp(irr, 0.0, double(protocol::kMaxIrradiance))));
  }
  r.wind_speed = tenths(truth.wind_speed_ms, noise.wind_speed_ms, Tenths{}, protocol::kMaxWindSpeed);
  const long dir = std::lround(truth.wind_dir_deg + gaussian(rng, noise.wind_dir_deg));
  r.wind_dir = static_cast<int>(((dir % 360) + 360) % 360);
  return r;
}

double CorruptionModel::probability(double baud) const {
  if (baud <= safe_baud) return 0.0;
  if (baud >= max_baud) return p_max;
  return p_max * (baud - safe_baud) / (max_baud - safe_baud);
}

void CorruptionModel::validate() const {
  require(p_max >= 0 && p_max <= 1, "corruption: p_max outside [0, 1]");
  require(safe_baud > 0 && safe_baud < max_baud, "corruption: need 0 < safe_baud < max_baud");
}

std::string corrupt(std::string_view bytes, const CorruptionModel& model, double baud, std::mt19937_64& rng) {
  std::string out(bytes);
  const double p = model.probability(baud);
  if (p <= 0) return out;
  std::bernoulli_distribution hit(p);
  std::uniform_int_distribution<int> flip(1, 255);
  for (char& c : out) {
    if (hit(rng)) c = static_cast<char>(static_cast<unsigned char>(c) ^ flip(rng));
  }
  return out;
}

void NodeConfig::validate() const {
  require(station_id >= protocol::kMinStationId && station_id <= protocol::kMaxStationId,
          "node: station_id outside 1..255");
  require(baud > 0, "node: baud must be positive");
  require(latency_min_s >= 0 && latency_min_s <= latency_max_s, "node: need 0 <= latency_min_s <= latency_max_s");
  require(time_scale >= 1, "node: time_scale must be >= 1");
  corruption.validate();
  climate.validate();
}

SensorNode::SensorNode(const NodeConfig& config)
    : config_(config),
      weather_(config.climate, static_cast<std::uint64_t>(config.station_id)),
      latency_rng_(make_rng(config.climate.seed, config.station_id, 2)),
      noise_rng_(make_rng(config.climate.seed, config.station_id, 3)),
      line_rng_(make_rng(config.climate.seed, config.station_id, 4)) {
  config_.validate();
}

SimDuration SensorNode::draw_latency() {
  const auto lo = std::chrono::ceil<SimDuration>(std::chrono::duration<double>(config_.latency_min_s));
  const auto hi = std::chrono::floor<SimDuration>(std::chrono::duration<double>(config_.latency_max_s));
  if (hi <= lo) return lo;
  std::uniform_int_distribution<SimDuration::rep> pick(lo.count(), hi.count());
  return SimDuration(pick(latency_rng_));
}

protocol::Reading SensorNode::measure(SimTime t) {
  const Truth truth = weather_.at(t);
  auto reading = sample_sensors(truth, config_.noise, noise_rng_, config_.station_id, seq_);
  seq_ = (seq_ + 1) % protocol::kSeqModulus;
  return reading;
}

std::string SensorNode::transmit(const protocol::Reading& reading) {
  return corrupt(protocol::encode_measurement(reading), config_.corruption, config_.baud, line_rng_);
}

void run_node(SensorNode& node, Transport& transport, Clock& clock, std::stop_token stop, const NodeHooks& hooks) {
  protocol::StreamScanner scanner;
  std::string inbound;
  std::vector<protocol::Decoded> frames;
  while (!stop.stop_requested()) {
    inbound.clear();
    const ReadStatus status = read_until(transport, clock, inbound, kSimTimeMax, stop);
    if (status == ReadStatus::kClosed) return;
    if (status == ReadStatus::kEmpty) continue;
    frames.clear();
    scanner.feed(inbound, frames);
    for (const auto& frame : frames) {
      const auto* poll = std::get_if<protocol::Poll>(&frame);
      if (poll == nullptr || poll->station_id != node.config().station_id) continue;
      if (!clock.sleep_for(node.draw_latency(), stop)) return;
      const SimTime at = clock.now();
      const auto reading = node.measure(at);
      if (hooks.on_response) hooks.on_response(reading, at);
      try {
        transport.write(node.transmit(reading));
      } catch (const TransportClosed&) {
        return;
      }
    }
  }
}

}  // namespace wxline::nodesim
