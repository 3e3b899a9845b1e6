#include "wxline/nodesim.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace wxline;
using namespace wxline::nodesim;
using namespace std::chrono_literals;
using wxline::testing::at_utc;

TEST(Diurnal, TemperaturePeaksAtPeakHour) {
  ClimateModel m;
  const Truth t = diurnal(m, at_utc("2024-07-01T15:00:00Z"));
  EXPECT_NEAR(t.temperature_c, m.t_mean + m.t_amplitude, 1e-9);
  const Truth low = diurnal(m, at_utc("2024-07-01T03:00:00Z"));
  EXPECT_NEAR(low.temperature_c, m.t_mean - m.t_amplitude, 1e-9);
}

TEST(Diurnal, IrradianceFollowsDaylight) {
  ClimateModel m;
  EXPECT_EQ(diurnal(m, at_utc("2024-07-01T00:00:00Z")).irradiance_wm2, 0.0);
  EXPECT_EQ(diurnal(m, at_utc("2024-07-01T05:59:59Z")).irradiance_wm2, 0.0);
  EXPECT_EQ(diurnal(m, at_utc("2024-07-01T18:30:00Z")).irradiance_wm2, 0.0);
  EXPECT_NEAR(diurnal(m, at_utc("2024-07-01T12:00:00Z")).irradiance_wm2, m.s_max, 1e-9);
  EXPECT_NEAR(diurnal(m, at_utc("2024-07-01T09:00:00Z")).irradiance_wm2, m.s_max * std::sin(M_PI / 4), 1e-9);
}

TEST(Diurnal, HumidityStaysInRange) {
  ClimateModel m;
  m.rh_base = 120;
  for (int h = 0; h < 24; ++h) {
    const double rh = diurnal(m, at_utc("2024-07-01T00:00:00Z") + std::chrono::hours(h)).humidity_pct;
    EXPECT_GE(rh, 0.0);
    EXPECT_LE(rh, 100.0);
  }
}

TEST(Weather, DeterministicForSeed) {
  ClimateModel m;
  Weather a(m), b(m);
  for (int i = 0; i < 100; ++i) {
    const SimTime t = at_utc("2024-07-01T00:00:00Z") + std::chrono::seconds(10 * i);
    const Truth x = a.at(t), y = b.at(t);
    EXPECT_EQ(x.wind_speed_ms, y.wind_speed_ms);
    EXPECT_EQ(x.wind_dir_deg, y.wind_dir_deg);
    EXPECT_GE(x.wind_speed_ms, 0.0);
    EXPECT_GE(x.wind_dir_deg, 0.0);
    EXPECT_LT(x.wind_dir_deg, 360.0);
  }
}

TEST(Sensors, ZeroNoiseIsTruthAtWirePrecision) {
  Truth t{23.46, 81.04, 512.6, 3.36, 359.7};
  std::mt19937_64 rng(1);
  const auto r = sample_sensors(t, SensorNoise::none(), rng, 4, 17);
  EXPECT_EQ(r, protocol::make_reading(4, 17, 23.5, 81.0, 513, 3.4, 0));
}

TEST(Sensors, ClampsAtHumidityCeiling) {
  Truth t{20.0, 100.0, 0.0, 1.0, 0.0};
  SensorNoise noise = SensorNoise::none();
  noise.humidity_pct = 5.0;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto r = sample_sensors(t, noise, rng, 1, 0);
    EXPECT_LE(r.humidity, protocol::kMaxHumidity);
  }
}

TEST(Sensors, SameSeedSameReading) {
  Truth t{20.0, 60.0, 300.0, 2.0, 45.0};
  std::mt19937_64 a(99), b(99);
  EXPECT_EQ(sample_sensors(t, SensorNoise{}, a, 1, 0), sample_sensors(t, SensorNoise{}, b, 1, 0));
}

TEST(Sensors, DarkIrradianceReadsZero) {
  Truth t{20.0, 60.0, 0.0, 2.0, 45.0};
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(sample_sensors(t, SensorNoise{}, rng, 1, 0).irradiance, 0);
}

TEST(Corruption, IdentityAtSafeBaud) {
  CorruptionModel model;
  std::mt19937_64 rng(1);
  const std::string frame = protocol::encode_measurement(protocol::make_reading(1, 1, 20.0, 50.0, 100, 2.0, 10));
  EXPECT_EQ(model.probability(9600), 0.0);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(corrupt(frame, model, 9600, rng), frame);
}

TEST(Corruption, IdentityWhenDisabled) {
  CorruptionModel model;
  model.p_max = 0;
  std::mt19937_64 rng(1);
  const std::string bytes(1000, 'a');
  for (double baud : {9600.0, 500'000.0, 1'000'000.0, 4'000'000.0}) EXPECT_EQ(corrupt(bytes, model, baud, rng), bytes);
}

TEST(Corruption, FractionWithinBinomialBoundsAtMaxBaud) {
  CorruptionModel model;
  std::mt19937_64 rng(2024);
  const std::size_t n = 1'000'000;
  const std::string input(n, 'W');
  const std::string output = corrupt(input, model, 1'000'000, rng);
  ASSERT_EQ(output.size(), n);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < n; ++i) changed += output[i] != input[i];

  const double p = model.p_max;
  const double mean = static_cast<double>(n) * p;
  const double sigma = std::sqrt(static_cast<double>(n) * p * (1 - p));
  EXPECT_GE(static_cast<double>(changed), mean - 3 * sigma);
  EXPECT_LE(static_cast<double>(changed), mean + 3 * sigma);
}

TEST(Corruption, ProbabilityIsLinearBetweenBauds) {
  CorruptionModel model;
  const double mid = (model.safe_baud + model.max_baud) / 2;
  EXPECT_NEAR(model.probability(mid), model.p_max / 2, 1e-12);
  EXPECT_EQ(model.probability(2'000'000), model.p_max);
}

TEST(NodeConfig, RejectsBadValues) {
  NodeConfig c;
  EXPECT_NO_THROW(c.validate());
  c.baud = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = NodeConfig{};
  c.latency_min_s = 6;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = NodeConfig{};
  c.station_id = 256;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(SensorNode, LatencyWithinConfiguredBounds) {
  NodeConfig c;
  SensorNode node(c);
  for (int i = 0; i < 5000; ++i) {
    const SimDuration d = node.draw_latency();
    EXPECT_GE(d, 4s);
    EXPECT_LE(d, 5s);
  }
}

TEST(SensorNode, SeqWrapsAtModulus) {
  NodeConfig c;
  SensorNode node(c);
  const SimTime t = at_utc("2024-07-01T12:00:00Z");
  for (int i = 0; i < protocol::kSeqModulus; ++i) EXPECT_EQ(node.measure(t + std::chrono::seconds(i)).seq, i);
  EXPECT_EQ(node.measure(t + 20000s).seq, 0);
}

namespace {

struct NodeRun {
  std::vector<protocol::Decoded> replies;
  std::vector<SimTime> reply_times;
};

// Sends `polls` to a node on a virtual clock and collects what comes back.
NodeRun poll_node(const NodeConfig& config, const std::vector<int>& polls) {
  const SimTime start = at_utc("2024-07-01T12:00:00Z");
  VirtualClock clock(start);
  auto [collector_end, node_end] = make_in_process_pair(clock);
  SensorNode node(config);
  NodeRun run;
  std::stop_source stop;
  {
    ActorGroup actors(clock);
    actors.spawn([&, &t = node_end] { run_node(node, *t, clock, stop.get_token()); });
    actors.spawn([&, &t = collector_end] {
      protocol::StreamScanner scanner;
      for (int id : polls) {
        t->write(protocol::encode_poll(id));
        std::string bytes;
        const SimTime deadline = clock.now() + 10s;
        std::vector<protocol::Decoded> got;
        while (got.empty() && read_until(*t, clock, bytes, deadline) == ReadStatus::kData) scanner.feed(bytes, got);
        bytes.clear();
        for (auto& d : got) {
          run.replies.push_back(std::move(d));
          run.reply_times.push_back(clock.now());
        }
        clock.sleep_until(deadline, {});
      }
      stop.request_stop();
    });
  }
  return run;
}

}  // namespace

TEST(RunNode, OnePollOneFrame) {
  NodeConfig c;
  const auto run = poll_node(c, {1, 1, 1});
  ASSERT_EQ(run.replies.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(std::get<protocol::Reading>(run.replies[i]).seq, i);
}

TEST(RunNode, IgnoresOtherStations) {
  NodeConfig c;
  c.station_id = 2;
  const auto run = poll_node(c, {1, 3, 2});
  ASSERT_EQ(run.replies.size(), 1u);
  EXPECT_EQ(std::get<protocol::Reading>(run.replies[0]).station_id, 2);
  EXPECT_EQ(std::get<protocol::Reading>(run.replies[0]).seq, 0);
}

TEST(RunNode, ResponseLatencyCompressedByTimeScale) {
  NodeConfig c;
  ScaledSystemClock clock(100.0);
  auto [collector_end, node_end] = make_in_process_pair(clock);
  SensorNode node(c);
  std::stop_source stop;
  std::jthread node_thread([&, &t = node_end] { run_node(node, *t, clock, stop.get_token()); });

  std::vector<double> wall_ms;
  for (int i = 0; i < 10; ++i) {
    const auto sent = std::chrono::steady_clock::now();
    collector_end->write(protocol::encode_poll(1));
    std::string bytes;
    while (bytes.find('\n') == std::string::npos) {
      ASSERT_EQ(read_until(*collector_end, clock, bytes, clock.now() + 10s), ReadStatus::kData);
    }
    wall_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - sent).count());
  }
  stop.request_stop();
  node_thread.join();

  for (double ms : wall_ms) {
    EXPECT_GE(ms, 40.0 - 1.0);
    EXPECT_LE(ms, 50.0 + 15.0);  // scheduler slack
  }
}
