#include "wxline/transport.hpp"

#include <gtest/gtest.h>

#include "support.hpp"

using namespace wxline;
using namespace std::chrono_literals;

namespace {

const SimTime kStart = wxline::testing::at_utc("2024-07-01T00:00:00Z");

}  // namespace

TEST(Endpoint, Parse) {
  const auto e = parse_endpoint("127.0.0.1:5001");
  ASSERT_TRUE(e);
  EXPECT_EQ(e->host, "127.0.0.1");
  EXPECT_EQ(e->port, 5001);
  EXPECT_TRUE(parse_endpoint("localhost:0"));
  for (const char* bad : {"", "host", ":80", "host:", "host:65536", "host:-1", "host:8x"}) {
    EXPECT_FALSE(parse_endpoint(bad)) << bad;
  }
}

TEST(InProcess, BytesFlowBothWays) {
  VirtualClock clock(kStart);
  auto [a, b] = make_in_process_pair(clock);
  a->write("hello");
  b->write("world");
  std::string got;
  EXPECT_EQ(b->read_available(got), ReadStatus::kData);
  EXPECT_EQ(got, "hello");
  got.clear();
  EXPECT_EQ(a->read_available(got), ReadStatus::kData);
  EXPECT_EQ(got, "world");
  EXPECT_EQ(a->read_available(got), ReadStatus::kEmpty);
}

TEST(InProcess, CloseIsSeenByPeer) {
  VirtualClock clock(kStart);
  auto [a, b] = make_in_process_pair(clock);
  a->write("last");
  a->close();
  std::string got;
  EXPECT_EQ(b->read_available(got), ReadStatus::kData);
  EXPECT_EQ(b->read_available(got), ReadStatus::kClosed);
  EXPECT_THROW(b->write("x"), TransportClosed);
}

TEST(InProcess, ReadUntilTimesOutInVirtualTime) {
  VirtualClock clock(kStart);
  auto [a, b] = make_in_process_pair(clock);
  ReadStatus status = ReadStatus::kData;
  SimTime when{};
  {
    ActorGroup actors(clock);
    actors.spawn([&, &b = b] {
      std::string out;
      status = read_until(*b, clock, out, kStart + 8s);
      when = clock.now();
    });
  }
  EXPECT_EQ(status, ReadStatus::kEmpty);
  EXPECT_EQ(when, kStart + 8s);
}

TEST(InProcess, ReadUntilWakesOnWrite) {
  VirtualClock clock(kStart);
  auto [a, b] = make_in_process_pair(clock);
  std::string out;
  SimTime when{};
  {
    ActorGroup actors(clock);
    actors.spawn([&, &b = b] {
      read_until(*b, clock, out, kStart + 8s);
      when = clock.now();
    });
    actors.spawn([&, &a = a] {
      clock.sleep_for(3s, {});
      a->write("ping");
    });
  }
  EXPECT_EQ(out, "ping");
  EXPECT_EQ(when, kStart + 3s);
}

TEST(Tcp, LoopbackRoundTrip) {
  ScaledSystemClock clock(1.0);
  TcpListener listener(Endpoint{"127.0.0.1", 0});
  ASSERT_NE(listener.port(), 0);

  std::unique_ptr<TcpTransport> server_side;
  std::jthread acceptor([&] { server_side = listener.accept({}); });
  auto client = connect_tcp(Endpoint{"127.0.0.1", listener.port()}, 1000ms);
  acceptor.join();
  ASSERT_TRUE(client);
  ASSERT_TRUE(server_side);

  client->write("$RQ,1*1E\r\n");
  std::string got;
  while (got.size() < 10) {
    ASSERT_EQ(read_until(*server_side, clock, got, clock.now() + 2s), ReadStatus::kData);
  }
  EXPECT_EQ(got, "$RQ,1*1E\r\n");

  client->close();
  std::string rest;
  EXPECT_EQ(read_until(*server_side, clock, rest, clock.now() + 2s), ReadStatus::kClosed);
}

TEST(Tcp, ConnectToClosedPortFails) {
  std::uint16_t port = 0;
  {
    TcpListener probe(Endpoint{"127.0.0.1", 0});
    port = probe.port();
  }
  EXPECT_EQ(connect_tcp(Endpoint{"127.0.0.1", port}, 500ms), nullptr);
}

TEST(Tcp, AcceptReturnsNullOnStop) {
  TcpListener listener(Endpoint{"127.0.0.1", 0});
  std::stop_source stop;
  std::jthread stopper([&] {
    std::this_thread::sleep_for(30ms);
    stop.request_stop();
  });
  EXPECT_EQ(listener.accept(stop.get_token()), nullptr);
}
