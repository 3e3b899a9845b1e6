// Simulated sensor node: deterministic weather, noisy sensors with a slow
// response time, a poll-driven serial responder and a baud-dependent line
// corruption model.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stop_token>
#include <string>
#include <string_view>

#include "wxline/clock.hpp"
#include "wxline/protocol.hpp"
#include "wxline/transport.hpp"

namespace wxline::nodesim {

// Parameters of the synthetic climate. Defaults describe a warm, humid
// coastal site in the wet season.
struct ClimateModel {
  double t_mean = 26.0;         // deg C
  double t_amplitude = 6.0;     // deg C
  double t_peak_hour = 15.0;    // hour of day (UTC)
  double s_max = 1000.0;        // W/m2 clear-sky peak
  double sunrise_hour = 6.0;
  double sunset_hour = 18.0;
  double rh_base = 75.0;        // %
  double rh_temp_slope = -1.5;  // % per deg C
  double wind_mean = 4.0;       // m/s
  double wind_reversion = 0.01; // 1/s
  double wind_noise = 0.3;      // m/s per sqrt(s)
  std::uint64_t seed = 1;

  // Throws std::invalid_argument.
  void validate() const;
};

struct Truth {
  double temperature_c = 0;
  double humidity_pct = 0;
  double irradiance_wm2 = 0;
  double wind_speed_ms = 0;
  double wind_dir_deg = 0;
};

// Deterministic diurnal part (temperature, humidity, irradiance). The wind
// fields of the result are zero.
Truth diurnal(const ClimateModel& model, SimTime t);

// Ground truth for one node. Wind is a seeded Ornstein-Uhlenbeck speed and
// a wrapped random-walk direction, stepped forward from the previous call,
// so results depend on the model, `t` and the history of calls.
class Weather {
 public:
  explicit Weather(const ClimateModel& model, std::uint64_t stream = 0);

  // weather_at
  Truth at(SimTime t);

  const ClimateModel& model() const { return model_; }

 private:
  ClimateModel model_;
  std::mt19937_64 rng_;
  std::optional<SimTime> last_;
  double speed_ = 0;
  double direction_ = 0;
};

// Standard deviations of additive sensor noise.
struct SensorNoise {
  double temperature_c = 0.1;
  double humidity_pct = 0.5;
  double irradiance_wm2 = 5.0;
  double wind_speed_ms = 0.1;
  double wind_dir_deg = 2.0;

  static SensorNoise none() { return {0, 0, 0, 0, 0}; }
};

// Adds noise, clamps to the wire ranges and rounds to wire precision. A
// dark pyranometer (truth irradiance 0) reads exactly 0.
protocol::Reading sample_sensors(const Truth& truth, const SensorNoise& noise, std::mt19937_64& rng,
                                 int station_id, int seq);

struct CorruptionModel {
  double safe_baud = 115200;
  double max_baud = 1'000'000;
  double p_max = 0.02;

  // Per-byte corruption probability: 0 up to safe_baud, then linear up to
  // p_max at max_baud, and p_max beyond.
  double probability(double baud) const;
  void validate() const;
};

// Replaces each byte, with probability model.probability(baud), by a
// different uniformly drawn byte. Length is preserved.
std::string corrupt(std::string_view bytes, const CorruptionModel& model, double baud, std::mt19937_64& rng);

struct NodeConfig {
  int station_id = 1;
  double baud = 9600;
  double latency_min_s = 4.0;
  double latency_max_s = 5.0;
  double time_scale = 1.0;  // consumed by whoever builds the clock
  CorruptionModel corruption;
  ClimateModel climate;
  SensorNoise noise;

  void validate() const;
};

// The node's sampling state without any I/O.
class SensorNode {
 public:
  explicit SensorNode(const NodeConfig& config);

  const NodeConfig& config() const { return config_; }

  SimDuration draw_latency();

  // Samples at `t` and advances seq.
  protocol::Reading measure(SimTime t);

  // Encoded frame after line corruption.
  std::string transmit(const protocol::Reading& reading);

  int next_seq() const { return seq_; }

 private:
  NodeConfig config_;
  Weather weather_;
  std::mt19937_64 latency_rng_;
  std::mt19937_64 noise_rng_;
  std::mt19937_64 line_rng_;
  int seq_ = 0;
};

struct NodeHooks {
  // Called with every reading before it is corrupted and written.
  std::function<void(const protocol::Reading&, SimTime)> on_response;
};

// Answers polls for config.station_id on `transport` until it closes or
// `stop` fires. Polls for other stations and malformed input are ignored.
void run_node(SensorNode& node, Transport& transport, Clock& clock, std::stop_token stop,
              const NodeHooks& hooks = {});

}  // namespace wxline::nodesim
