#pragma once

// Thin POSIX socket helpers shared by the UDP estimate source and the
// TCP/UDP sinks.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "sec/error.hpp"

namespace sec::net {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Fd& operator=(Fd&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

struct HostPort {
  std::string host;
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Splits "host:port" on the last colon. The host may be empty ("":0 binds
/// every interface) and IPv6 literals may be bracketed.
inline std::optional<HostPort> parse_host_port(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) return std::nullopt;
  std::string_view host = text.substr(0, colon);
  std::string_view port = text.substr(colon + 1);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') {
    host = host.substr(1, host.size() - 2);
  }
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc{} || ptr != port.data() + port.size() || value > 65535) return std::nullopt;
  return HostPort{std::string(host), static_cast<std::uint16_t>(value)};
}

struct AddrInfoDeleter {
  void operator()(addrinfo* ai) const { ::freeaddrinfo(ai); }
};
using AddrInfoPtr = std::unique_ptr<addrinfo, AddrInfoDeleter>;

inline AddrInfoPtr resolve(const HostPort& hp, int socktype, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = socktype;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(hp.port);
  const char* host = hp.host.empty() ? nullptr : hp.host.c_str();
  const int rc = ::getaddrinfo(host, port.c_str(), &hints, &res);
  if (rc != 0) return nullptr;
  return AddrInfoPtr(res);
}

/// Port actually bound (useful after binding port 0).
inline std::uint16_t local_port(int fd) {
  sockaddr_storage ss{};
  socklen_t len = sizeof ss;
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&ss), &len) != 0) return 0;
  if (ss.ss_family == AF_INET) return ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
  if (ss.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port);
  return 0;
}

inline Fd bind_udp(const HostPort& hp) {
  auto ai = resolve(hp, SOCK_DGRAM, true);
  if (!ai) throw BindFailure("cannot resolve " + hp.str());
  for (addrinfo* p = ai.get(); p; p = p->ai_next) {
    Fd fd(::socket(p->ai_family, p->ai_socktype, p->ai_protocol));
    if (!fd.valid()) continue;
    if (::bind(fd.get(), p->ai_addr, p->ai_addrlen) == 0) return fd;
  }
  throw BindFailure("cannot bind UDP " + hp.str() + ": " + std::strerror(errno));
}

/// Connects with a bounded wait so an unreachable peer cannot stall a stage.
inline Fd connect_tcp(const HostPort& hp, int timeout_ms = 500) {
  auto ai = resolve(hp, SOCK_STREAM, false);
  if (!ai) throw ConnectFailure("cannot resolve " + hp.str());
  for (addrinfo* p = ai.get(); p; p = p->ai_next) {
    Fd fd(::socket(p->ai_family, p->ai_socktype, p->ai_protocol));
    if (!fd.valid()) continue;
    const int flags = ::fcntl(fd.get(), F_GETFL, 0);
    ::fcntl(fd.get(), F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd.get(), p->ai_addr, p->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{fd.get(), POLLOUT, 0};
      if (::poll(&pfd, 1, timeout_ms) == 1) {
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
      } else {
        rc = -1;
      }
    }
    if (rc == 0) {
      ::fcntl(fd.get(), F_SETFL, flags);
      return fd;
    }
  }
  throw ConnectFailure("cannot connect to " + hp.str());
}

/// Writes the whole buffer; false on any error (peer gone, etc.).
inline bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace sec::net
