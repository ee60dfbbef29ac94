#include "nbpk/channel.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>

#include "nbpk/wire.hpp"

namespace nbpk::channel {

namespace {

Unexpected<TransportError> fail(TransportErrc code, std::string detail) {
  return unexpected(TransportError{code, std::move(detail)});
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

bool valid_port(std::uint16_t port) { return port >= 1024; }

bool resolve(const Address& addr, sockaddr_in& out) {
  std::memset(&out, 0, sizeof(out));
  out.sin_family = AF_INET;
  out.sin_port = htons(addr.port);
  if (addr.host.empty() || addr.host == "0.0.0.0") {
    out.sin_addr.s_addr = htonl(INADDR_ANY);
    return true;
  }
  if (inet_pton(AF_INET, addr.host.c_str(), &out.sin_addr) == 1) return true;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(addr.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) return false;
  out.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return true;
}

}  // namespace

Result<Address, std::string> parse_address(const std::string& text, std::uint16_t default_port) {
  Address addr;
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    addr.host = text;
    addr.port = default_port;
  } else {
    addr.host = text.substr(0, colon);
    const auto port_text = text.substr(colon + 1);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
    if (ec != std::errc() || ptr != port_text.data() + port_text.size() || value > 65535)
      return unexpected(std::string("bad port in address '") + text + "'");
    addr.port = static_cast<std::uint16_t>(value);
  }
  if (addr.host.empty()) addr.host = "127.0.0.1";
  if (!valid_port(addr.port))
    return unexpected(std::string("port must be in [1024, 65535]: '") + text + "'");
  return addr;
}

Result<Ok, std::string> validate(const EndpointConfig& cfg) {
  // Port 0 asks the kernel for an ephemeral port.
  if (cfg.bind && cfg.bind->port != 0 && !valid_port(cfg.bind->port))
    return unexpected(std::string("bind port must be 0 or in [1024, 65535]"));
  if (cfg.peer && !valid_port(cfg.peer->port))
    return unexpected(std::string("peer port must be in [1024, 65535]"));
  if (cfg.receive_buffer == 0) return unexpected(std::string("receive buffer must be positive"));
  return Ok{};
}

Result<Ok, std::string> validate(const ImpairmentConfig& cfg) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(cfg.loss_p) || !prob(cfg.dup_p) || !prob(cfg.reorder_p))
    return unexpected(std::string("probabilities must lie in [0, 1]"));
  if (cfg.reorder_depth < 1) return unexpected(std::string("reorder_depth must be >= 1"));
  return Ok{};
}

UdpEndpoint::UdpEndpoint(int fd, EndpointConfig cfg)
    : fd_(fd), cfg_(std::move(cfg)), scratch_(cfg_.receive_buffer + 1) {}

UdpEndpoint::UdpEndpoint(UdpEndpoint&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)),
      cfg_(std::move(other.cfg_)),
      scratch_(std::move(other.scratch_)) {}

UdpEndpoint& UdpEndpoint::operator=(UdpEndpoint&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
    cfg_ = std::move(other.cfg_);
    scratch_ = std::move(other.scratch_);
  }
  return *this;
}

UdpEndpoint::~UdpEndpoint() {
  if (fd_ >= 0) ::close(fd_);
}

TransportResult<UdpEndpoint> UdpEndpoint::open(const EndpointConfig& cfg) {
  if (auto valid = validate(cfg); !valid) return fail(TransportErrc::InvalidConfig, valid.error());
  const int fd = ::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return fail(TransportErrc::Socket, errno_text("socket"));
  UdpEndpoint ep(fd, cfg);

  if (cfg.socket_buffer > 0) {
    // Best effort; the kernel silently caps at rmem_max.
    ::setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &cfg.socket_buffer, sizeof(cfg.socket_buffer));
    ::setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &cfg.socket_buffer, sizeof(cfg.socket_buffer));
  }
  if (cfg.bind) {
    sockaddr_in sa{};
    if (!resolve(*cfg.bind, sa))
      return fail(TransportErrc::InvalidConfig, "cannot resolve " + cfg.bind->host);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0)
      return fail(TransportErrc::Socket, errno_text(("bind " + cfg.bind->to_string()).c_str()));
  }
  return ep;
}

std::uint16_t UdpEndpoint::local_port() const {
  sockaddr_in sa{};
  socklen_t len = sizeof(sa);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len) != 0) return 0;
  return ntohs(sa.sin_port);
}

TransportResult<Ok> UdpEndpoint::send(ByteView datagram) {
  if (!cfg_.peer) return fail(TransportErrc::NoPeer, "endpoint has no peer");
  return send_to(datagram, *cfg_.peer);
}

TransportResult<Ok> UdpEndpoint::send_to(ByteView datagram, const Address& to) {
  if (datagram.size() > wire::kMaxDatagram)
    return fail(TransportErrc::Oversize, "datagram exceeds 65507 bytes");
  sockaddr_in sa{};
  if (!resolve(to, sa)) return fail(TransportErrc::InvalidConfig, "cannot resolve " + to.host);
  for (;;) {
    const auto n = ::sendto(fd_, datagram.data(), datagram.size(), 0,
                            reinterpret_cast<sockaddr*>(&sa), sizeof(sa));
    if (n >= 0) return Ok{};
    if (errno == EINTR) continue;
    // Loopback peers that are not listening produce ECONNREFUSED on later sends; UDP is fire-and-forget.
    if (errno == ECONNREFUSED) return Ok{};
    return fail(TransportErrc::Socket, errno_text("sendto"));
  }
}

TransportResult<Datagram> UdpEndpoint::recv(std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  for (;;) {
    const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      return fail(TransportErrc::Socket, errno_text("poll"));
    }
    if (ready == 0) return fail(TransportErrc::TimedOut, "no datagram before timeout");
    break;
  }

  sockaddr_in from{};
  iovec iov{scratch_.data(), scratch_.size()};
  msghdr msg{};
  msg.msg_name = &from;
  msg.msg_namelen = sizeof(from);
  msg.msg_iov = &iov;
  msg.msg_iovlen = 1;
  ssize_t n;
  do {
    n = ::recvmsg(fd_, &msg, MSG_TRUNC);
  } while (n < 0 && errno == EINTR);
  if (n < 0) {
    if (errno == ECONNREFUSED || errno == EAGAIN)
      return fail(TransportErrc::TimedOut, "no datagram before timeout");
    return fail(TransportErrc::Socket, errno_text("recvmsg"));
  }
  if (static_cast<std::size_t>(n) > cfg_.receive_buffer || (msg.msg_flags & MSG_TRUNC))
    return fail(TransportErrc::Truncated,
                "datagram of " + std::to_string(n) + " bytes exceeds receive buffer of " +
                    std::to_string(cfg_.receive_buffer));
  char host[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &from.sin_addr, host, sizeof(host));
  Datagram d;
  d.data.assign(scratch_.begin(), scratch_.begin() + n);
  d.source = Address{host, ntohs(from.sin_port)};
  return d;
}

}  // namespace nbpk::channel
