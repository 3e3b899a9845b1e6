#include <gtest/gtest.h>
#include <httplib.h>

#include <regex>
#include <sstream>

#include "process.hpp"
#include "support.hpp"
#include "wxline/logstore.hpp"
#include "wxline/protocol.hpp"
#include "wxline/transport.hpp"
#include <json.hpp>

using namespace wxline;
using namespace std::chrono_literals;
using wxline::testing::ChildProcess;
using wxline::testing::run_command;
using wxline::testing::spit;
using wxline::testing::TempDir;

namespace {

const std::string kBin = WXLINE_BIN;

const char* kFixture =
    "rx_time,station_id,seq,temp_c,rh_pct,irr_wm2,wind_ms,wind_deg\n"
    "2024-07-01T00:00:00Z,1,0,10.0,50.0,100,2.0,90\n"
    "2024-07-01T00:00:10Z,1,1,12.5,55.0,200,3.0,180\n"
    "2024-07-01T00:00:20Z,1,2,15.5,62.0,330,4.5,270\n";

std::vector<std::vector<std::string>> table_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::istringstream words(line);
    std::vector<std::string> row;
    for (std::string w; words >> w;) row.push_back(w);
    if (!row.empty()) rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST(Cli, UsageErrors) {
  TempDir dir;
  EXPECT_EQ(run_command({kBin}, dir.path()).code, 2);
  EXPECT_EQ(run_command({kBin, "bogus"}, dir.path()).code, 2);
  EXPECT_EQ(run_command({kBin, "node", "--no-such-flag"}, dir.path()).code, 2);
  EXPECT_EQ(run_command({kBin, "--help"}, dir.path()).code, 0);
}

TEST(Cli, NodeRejectsZeroBaud) {
  TempDir dir;
  const auto r = run_command({kBin, "node", "--baud", "0"}, dir.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("baud"), std::string::npos);
}

TEST(Cli, NodeServesPollsOverTcp) {
  TempDir dir;
  ChildProcess node({kBin, "node", "--station-id", "1", "--baud", "9600", "--listen", "127.0.0.1:0", "--time-scale",
                     "100"},
                    dir.path());
  const auto port = node.await_output(std::regex("listening on 127\\.0\\.0\\.1:(\\d+)"), 5s);
  ASSERT_TRUE(port) << node.err();

  auto conn = connect_tcp(Endpoint{"127.0.0.1", static_cast<std::uint16_t>(std::stoi(*port))}, 2000ms);
  ASSERT_TRUE(conn);
  ScaledSystemClock clock(1.0);
  const auto sent = std::chrono::steady_clock::now();
  conn->write(protocol::encode_poll(1));
  std::string bytes;
  while (bytes.find('\n') == std::string::npos) {
    ASSERT_EQ(read_until(*conn, clock, bytes, clock.now() + 2s), ReadStatus::kData);
  }
  const auto wall = std::chrono::steady_clock::now() - sent;
  const auto decoded = protocol::decode_frame(bytes);
  ASSERT_TRUE(std::holds_alternative<protocol::Reading>(decoded)) << bytes;
  EXPECT_EQ(std::get<protocol::Reading>(decoded).station_id, 1);
  // 4-5 s compressed 100 times.
  EXPECT_GE(wall, 39ms);
  EXPECT_LE(wall, 150ms);

  node.signal(SIGTERM);
  EXPECT_EQ(node.wait(5s), 0);
}

TEST(Cli, CollectRejectsDuplicateStationsBeforeCreatingAnything) {
  TempDir dir;
  const auto r = run_command({kBin, "collect", "--stations", "1@sim,1@sim", "--log", (dir / "log").string(),
                              "--bind", "127.0.0.1:0"},
                             dir.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(std::filesystem::exists(dir / "log"));
}

TEST(Cli, CollectFailsOnUnwritableLog) {
  TempDir dir;
  spit(dir / "file", "x");
  const auto r = run_command({kBin, "collect", "--stations", "1@sim", "--log", (dir / "file" / "log").string(),
                              "--bind", "127.0.0.1:0"},
                             dir.path());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("not writable"), std::string::npos);
}

TEST(Cli, CollectRunsServesAndStopsCleanly) {
  TempDir dir;
  ChildProcess collect({kBin, "collect", "--stations", "1@sim,2@sim", "--log", (dir / "log").string(), "--bind",
                        "127.0.0.1:0", "--time-scale", "500", "--durable", "false"},
                       dir.path());
  const auto port = collect.await_output(std::regex("serving http://127\\.0\\.0\\.1:(\\d+)/"), 5s);
  ASSERT_TRUE(port) << collect.err();
  ASSERT_TRUE(collect.await_output(std::regex("st=2 seq=1 "), 10s)) << collect.err();

  httplib::Client client("127.0.0.1", std::stoi(*port));
  const auto page = client.Get("/");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);
  const auto current = client.Get("/api/current");
  ASSERT_TRUE(current);
  EXPECT_NE(current->body.find("\"station_id\":2"), std::string::npos);

  collect.signal(SIGINT);
  EXPECT_EQ(collect.wait(10s), 0) << collect.err();
  const auto log = logstore::LogStore(dir / "log").read_all();
  EXPECT_GE(log.records.size(), 4u);
  EXPECT_EQ(log.malformed, 0u);
}

TEST(Cli, CollectWithUnreachableNodeKeepsRunning) {
  TempDir dir;
  std::uint16_t dead_port = 0;
  {
    TcpListener probe(Endpoint{"127.0.0.1", 0});
    dead_port = probe.port();
  }
  ChildProcess collect({kBin, "collect", "--stations", "1@127.0.0.1:" + std::to_string(dead_port), "--log",
                        (dir / "log").string(), "--bind", "127.0.0.1:0", "--time-scale", "200"},
                       dir.path());
  const auto port = collect.await_output(std::regex("serving http://127\\.0\\.0\\.1:(\\d+)/"), 5s);
  ASSERT_TRUE(port) << collect.err();
  std::this_thread::sleep_for(300ms);
  httplib::Client client("127.0.0.1", std::stoi(*port));
  const auto health = client.Get("/healthz");
  ASSERT_TRUE(health);
  const auto body = nlohmann::json::parse(health->body);
  EXPECT_GT(body["stations"][0]["timeouts"].get<int>(), 0);
  EXPECT_EQ(body["stations"][0]["ok"].get<int>(), 0);
  const auto page = client.Get("/");
  ASSERT_TRUE(page);
  EXPECT_NE(page->body.find("no data"), std::string::npos);
  collect.signal(SIGTERM);
  EXPECT_EQ(collect.wait(10s), 0);
}

TEST(Cli, StatsFixtureTable) {
  TempDir dir;
  std::filesystem::create_directories(dir / "log");
  spit(dir / "log" / "wx-2024-07-01.csv", kFixture);
  const auto r = run_command({kBin, "stats", "--log", (dir / "log").string()}, dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = table_rows(r.out);
  auto find = [&](const std::string& name) {
    for (const auto& row : rows) {
      if (!row.empty() && row[0] == name) return row;
    }
    return std::vector<std::string>{};
  };
  // Hand computation: temperature (10.0 + 12.5 + 15.5) / 3 = 12.666..., and so on.
  EXPECT_EQ(find("records"), (std::vector<std::string>{"records", "3"}));
  EXPECT_EQ(find("temp_c"), (std::vector<std::string>{"temp_c", "°C", "10.0", "15.5", "12.67"}));
  EXPECT_EQ(find("rh_pct"), (std::vector<std::string>{"rh_pct", "%", "50.0", "62.0", "55.67"}));
  EXPECT_EQ(find("irr_wm2"), (std::vector<std::string>{"irr_wm2", "W/m²", "100", "330", "210.0"}));
  EXPECT_EQ(find("wind_ms"), (std::vector<std::string>{"wind_ms", "m/s", "2.0", "4.5", "3.17"}));
  EXPECT_EQ(find("wind_deg"), (std::vector<std::string>{"wind_deg", "°", "90", "270", "180.0"}));
}

TEST(Cli, StatsCsv) {
  TempDir dir;
  std::filesystem::create_directories(dir / "log");
  spit(dir / "log" / "wx-2024-07-01.csv", kFixture);
  const auto r = run_command({kBin, "stats", "--log", (dir / "log").string(), "--csv"}, dir.path());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out,
            "quantity,count,min,max,mean\n"
            "temp_c,3,10.0,15.5,12.67\n"
            "rh_pct,3,50.0,62.0,55.67\n"
            "irr_wm2,3,100,330,210.0\n"
            "wind_ms,3,2.0,4.5,3.17\n"
            "wind_deg,3,90,270,180.0\n");
}

TEST(Cli, StatsWindowAndFilters) {
  TempDir dir;
  std::filesystem::create_directories(dir / "log");
  spit(dir / "log" / "wx-2024-07-01.csv", kFixture);
  const std::string log = (dir / "log").string();
  const auto win = run_command({kBin, "stats", "--log", log, "--to", "2024-07-01T00:00:20Z", "--window", "15s", "--csv"},
                               dir.path());
  ASSERT_EQ(win.code, 0);
  EXPECT_NE(win.out.find("temp_c,1,12.5,12.5,12.50"), std::string::npos);

  EXPECT_EQ(run_command({kBin, "stats", "--log", log, "--station", "2"}, dir.path()).out, "no records\n");
  const auto empty = run_command({kBin, "stats", "--log", (dir / "empty").string()}, dir.path());
  EXPECT_EQ(empty.code, 0);
  EXPECT_EQ(empty.out, "no records\n");
  EXPECT_EQ(run_command({kBin, "stats", "--log", log, "--window", "soon"}, dir.path()).code, 2);
  EXPECT_EQ(run_command({kBin, "stats", "--log", log, "--from", "2024-07-02T00:00:00Z", "--to",
                         "2024-07-01T00:00:00Z"},
                        dir.path())
                .code,
            2);
}

TEST(Cli, ReplayUsage) {
  TempDir dir;
  EXPECT_EQ(run_command({kBin, "replay", "--log", (dir / "log").string(), "--speed", "0"}, dir.path()).code, 2);
  const auto empty = run_command({kBin, "replay", "--log", (dir / "log").string(), "--until", "2024-07-01T00:00:00Z"},
                                 dir.path());
  EXPECT_EQ(empty.code, 0);
  EXPECT_NE(empty.out.find("no data"), std::string::npos);
  EXPECT_NE(empty.out.find("2024-07-01T00:00:00Z"), std::string::npos);
}

TEST(Cli, ConfigFileFromEnvironment) {
  TempDir dir;
  spit(dir / "wx.ini", "[node]\nbaud = 0\n");
  const auto from_env = run_command({kBin, "node"}, dir.path(), {{"WXLINE_CONFIG", (dir / "wx.ini").string()}});
  EXPECT_EQ(from_env.code, 2);
  spit(dir / "bad.ini", "[node]\nwhat = 1\n");
  EXPECT_EQ(run_command({kBin, "node", "--config", (dir / "bad.ini").string()}, dir.path()).code, 2);
  // A command-line flag beats the file.
  ChildProcess node({kBin, "node", "--baud", "9600", "--listen", "127.0.0.1:0"}, dir.path(),
                    {{"WXLINE_CONFIG", (dir / "wx.ini").string()}});
  EXPECT_TRUE(node.await_output(std::regex("listening on"), 5s)) << node.err();
  node.signal(SIGINT);
  EXPECT_EQ(node.wait(5s), 0);
}
