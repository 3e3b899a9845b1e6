// Duplex byte streams between a node and the collector: an in-process pair
// driven by the shared Clock (tests, single-process runs) and TCP sockets
// (cross-process runs).

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <utility>

#include "wxline/clock.hpp"

namespace wxline {

class TransportClosed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ReadStatus { kData, kEmpty, kClosed };

class Transport {
 public:
  virtual ~Transport() = default;

  // Throws TransportClosed once either side has closed.
  virtual void write(std::string_view bytes) = 0;

  // Non-blocking: appends whatever is buffered to `out`.
  virtual ReadStatus read_available(std::string& out) = 0;

  // True when read_available would return kData or kClosed.
  virtual bool readable() = 0;

  // OS handle for readiness polling, or -1 when readiness is signalled
  // through the clock.
  virtual int native_handle() const { return -1; }

  virtual void close() = 0;
};

// Blocks until one of `transports` is readable, `stop` fires or `deadline`
// passes. Returns true when something is readable.
bool wait_readable(std::span<Transport* const> transports, Clock& clock, SimTime deadline,
                   std::stop_token stop = {});

// Waits for and then reads available bytes.
ReadStatus read_until(Transport& transport, Clock& clock, std::string& out, SimTime deadline,
                      std::stop_token stop = {});

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_in_process_pair(Clock& clock);

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

// Parses `host:port`.
std::optional<Endpoint> parse_endpoint(std::string_view text);

class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(int fd);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void write(std::string_view bytes) override;
  ReadStatus read_available(std::string& out) override;
  bool readable() override;
  int native_handle() const override { return fd_; }
  void close() override;

 private:
  int fd_;
  bool peer_closed_ = false;
};

// Connects within `timeout` of wall time; nullptr when unreachable.
std::unique_ptr<TcpTransport> connect_tcp(const Endpoint& endpoint, std::chrono::milliseconds timeout);

class TcpListener {
 public:
  // Throws std::system_error on bind/listen failure. Port 0 picks a free port.
  explicit TcpListener(const Endpoint& endpoint);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }

  // nullptr when `stop` fired first.
  std::unique_ptr<TcpTransport> accept(std::stop_token stop);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace wxline
