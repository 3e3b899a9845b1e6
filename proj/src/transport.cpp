#include "wxline/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <mutex>
#include <system_error>
#include <vector>

namespace wxline {

namespace {

// One direction of an in-process pair.
struct Pipe {
  std::mutex mutex;
  std::string bytes;
  bool closed = false;
};

class InProcessEndpoint final : public Transport {
 public:
  InProcessEndpoint(Clock& clock, std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out)
      : clock_(clock), in_(std::move(in)), out_(std::move(out)) {}
  ~InProcessEndpoint() override { close(); }

  void write(std::string_view bytes) override {
    {
      std::lock_guard lock(out_->mutex);
      if (out_->closed) throw TransportClosed("in-process transport closed");
      out_->bytes.append(bytes);
    }
    clock_.notify();
  }

  ReadStatus read_available(std::string& out) override {
    std::lock_guard lock(in_->mutex);
    if (!in_->bytes.empty()) {
      out.append(in_->bytes);
      in_->bytes.clear();
      return ReadStatus::kData;
    }
    return in_->closed ? ReadStatus::kClosed : ReadStatus::kEmpty;
  }

  bool readable() override {
    std::lock_guard lock(in_->mutex);
    return !in_->bytes.empty() || in_->closed;
  }

  void close() override {
    bool changed = false;
    for (Pipe* p : {in_.get(), out_.get()}) {
      std::lock_guard lock(p->mutex);
      changed |= !p->closed;
      p->closed = true;
    }
    if (changed) clock_.notify();
  }

 private:
  Clock& clock_;
  std::shared_ptr<Pipe> in_;
  std::shared_ptr<Pipe> out_;
};

constexpr auto kPollSlice = std::chrono::milliseconds(10);

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_in_process_pair(Clock& clock) {
  auto a_to_b = std::make_shared<Pipe>();
  auto b_to_a = std::make_shared<Pipe>();
  return {std::make_unique<InProcessEndpoint>(clock, b_to_a, a_to_b),
          std::make_unique<InProcessEndpoint>(clock, a_to_b, b_to_a)};
}

bool wait_readable(std::span<Transport* const> transports, Clock& clock, SimTime deadline,
                   std::stop_token stop) {
  auto any_readable = [&] {
    return std::any_of(transports.begin(), transports.end(), [](Transport* t) { return t->readable(); });
  };
  const bool os_backed = std::any_of(transports.begin(), transports.end(),
                                     [](Transport* t) { return t->native_handle() >= 0; });
  if (!os_backed) {
    std::stop_callback wake(stop, [&clock] { clock.notify(); });
    clock.wait_until(deadline, [&] { return stop.stop_requested() || any_readable(); });
    return any_readable();
  }

  std::vector<pollfd> fds;
  for (Transport* t : transports) {
    if (t->native_handle() >= 0) fds.push_back(pollfd{t->native_handle(), POLLIN, 0});
  }
  const auto wall_end = clock.wall_deadline(deadline);
  while (true) {
    if (any_readable()) return true;
    if (stop.stop_requested()) return false;
    const auto now = std::chrono::steady_clock::now();
    if (now >= wall_end) return false;
    const auto slice = std::min<std::chrono::steady_clock::duration>(kPollSlice, wall_end - now);
    const auto ms = std::chrono::ceil<std::chrono::milliseconds>(slice).count();
    ::poll(fds.data(), fds.size(), static_cast<int>(ms));
  }
}

ReadStatus read_until(Transport& transport, Clock& clock, std::string& out, SimTime deadline,
                      std::stop_token stop) {
  Transport* one[] = {&transport};
  wait_readable(one, clock, deadline, std::move(stop));
  return transport.read_available(out);
}

std::optional<Endpoint> parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) return std::nullopt;
  const std::string_view port_text = text.substr(colon + 1);
  unsigned port = 0;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535) return std::nullopt;
  return Endpoint{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

// ---------------------------------------------------------------------------

TcpTransport::TcpTransport(int fd) : fd_(fd) {
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpTransport::~TcpTransport() { close(); }

void TcpTransport::write(std::string_view bytes) {
  while (!bytes.empty()) {
    if (fd_ < 0) throw TransportClosed("socket closed");
    const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        pollfd p{fd_, POLLOUT, 0};
        ::poll(&p, 1, 100);
        continue;
      }
      throw TransportClosed(std::system_category().message(errno));
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

ReadStatus TcpTransport::read_available(std::string& out) {
  if (fd_ < 0 || peer_closed_) return ReadStatus::kClosed;
  bool got = false;
  char buf[512];
  while (true) {
    const ssize_t n = ::recv(fd_, buf, sizeof(buf), MSG_DONTWAIT);
    if (n > 0) {
      out.append(buf, static_cast<std::size_t>(n));
      got = true;
      continue;
    }
    if (n == 0) {
      peer_closed_ = true;
      break;
    }
    if (errno == EINTR) continue;
    if (errno != EAGAIN && errno != EWOULDBLOCK) peer_closed_ = true;
    break;
  }
  if (got) return ReadStatus::kData;
  return peer_closed_ ? ReadStatus::kClosed : ReadStatus::kEmpty;
}

bool TcpTransport::readable() {
  if (fd_ < 0 || peer_closed_) return true;
  pollfd p{fd_, POLLIN, 0};
  return ::poll(&p, 1, 0) > 0 && (p.revents & (POLLIN | POLLHUP | POLLERR)) != 0;
}

void TcpTransport::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

namespace {

addrinfo* resolve(const Endpoint& endpoint, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* result = nullptr;
  const std::string port = std::to_string(endpoint.port);
  const char* host = endpoint.host.empty() || endpoint.host == "*" ? nullptr : endpoint.host.c_str();
  if (::getaddrinfo(host, port.c_str(), &hints, &result) != 0) return nullptr;
  return result;
}

}  // namespace

std::unique_ptr<TcpTransport> connect_tcp(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
  addrinfo* info = resolve(endpoint, false);
  if (info == nullptr) return nullptr;
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(info, ::freeaddrinfo);
  const int fd = ::socket(info->ai_family, info->ai_socktype | SOCK_CLOEXEC, info->ai_protocol);
  if (fd < 0) return nullptr;
  const int flags = ::fcntl(fd, F_GETFL);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd, info->ai_addr, info->ai_addrlen);
  if (rc < 0 && errno == EINPROGRESS) {
    pollfd p{fd, POLLOUT, 0};
    rc = ::poll(&p, 1, static_cast<int>(std::max<std::int64_t>(timeout.count(), 0)));
    int err = 0;
    socklen_t len = sizeof(err);
    if (rc == 1 && ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) == 0 && err == 0) rc = 0;
    else rc = -1;
  }
  if (rc != 0) {
    ::close(fd);
    return nullptr;
  }
  ::fcntl(fd, F_SETFL, flags);
  return std::make_unique<TcpTransport>(fd);
}

TcpListener::TcpListener(const Endpoint& endpoint) {
  addrinfo* info = resolve(endpoint, true);
  if (info == nullptr) {
    throw std::system_error(std::make_error_code(std::errc::invalid_argument),
                            "cannot resolve " + endpoint.host);
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(info, ::freeaddrinfo);
  fd_ = ::socket(info->ai_family, info->ai_socktype | SOCK_CLOEXEC, info->ai_protocol);
  if (fd_ < 0) throw std::system_error(errno, std::system_category(), "socket");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd_, info->ai_addr, info->ai_addrlen) != 0 || ::listen(fd_, 4) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    throw std::system_error(err, std::system_category(), "bind " + endpoint.host + ":" + std::to_string(endpoint.port));
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpTransport> TcpListener::accept(std::stop_token stop) {
  while (!stop.stop_requested()) {
    pollfd p{fd_, POLLIN, 0};
    if (::poll(&p, 1, static_cast<int>(kPollSlice.count())) <= 0) continue;
    const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) return std::make_unique<TcpTransport>(fd);
  }
  return nullptr;
}

}  // namespace wxline
