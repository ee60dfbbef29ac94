#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "nbpk/bytes.hpp"
#include "nbpk/prng.hpp"
#include "nbpk/result.hpp"

namespace nbpk::channel {

inline constexpr std::uint16_t kDefaultImagePort = 10021;
inline constexpr std::uint16_t kDefaultMotionPort = 10022;
inline constexpr std::uint16_t kDefaultCommandPort = 10023;

struct Address {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
  friend bool operator==(const Address&, const Address&) = default;
};

/// Parses "host:port" or a bare "host" (port then comes from `default_port`).
Result<Address, std::string> parse_address(const std::string& text, std::uint16_t default_port = 0);

struct EndpointConfig {
  std::optional<Address> bind;
  std::optional<Address> peer;
  /// Largest datagram recv() accepts; bigger ones are reported as Truncated.
  std::size_t receive_buffer = 65536;
  /// Kernel socket buffer (SO_RCVBUF); capped by net.core.rmem_max.
  int socket_buffer = 4 << 20;
};

Result<Ok, std::string> validate(const EndpointConfig& cfg);

enum class TransportErrc { InvalidConfig, Oversize, NoPeer, Socket, Truncated, TimedOut };

struct TransportError {
  TransportErrc code;
  std::string detail;
};

template <class T>
using TransportResult = Result<T, TransportError>;

struct Datagram {
  Bytes data;
  Address source;
};

/// Owning UDP socket. Move-only. One sender and one receiver loop may use it concurrently.
class UdpEndpoint {
 public:
  static TransportResult<UdpEndpoint> open(const EndpointConfig& cfg);

  UdpEndpoint(UdpEndpoint&& other) noexcept;
  UdpEndpoint& operator=(UdpEndpoint&& other) noexcept;
  UdpEndpoint(const UdpEndpoint&) = delete;
  UdpEndpoint& operator=(const UdpEndpoint&) = delete;
  ~UdpEndpoint();

  /// Sends one datagram to the configured peer.
  TransportResult<Ok> send(ByteView datagram);
  TransportResult<Ok> send_to(ByteView datagram, const Address& to);

  /// Waits up to `timeout` for exactly one datagram.
  TransportResult<Datagram> recv(std::chrono::milliseconds timeout);

  std::uint16_t local_port() const;

 private:
  UdpEndpoint(int fd, EndpointConfig cfg);

  int fd_ = -1;
  EndpointConfig cfg_;
  Bytes scratch_;
};

// ---------------------------------------------------------------------------
// Deterministic lossy-channel simulator.

struct ImpairmentConfig {
  double loss_p = 0.0;
  double dup_p = 0.0;
  double reorder_p = 0.0;
  std::uint32_t reorder_depth = 1;
  std::uint64_t base_delay_us = 0;
  std::uint64_t jitter_us = 0;
  std::uint64_t seed = 0;
};

Result<Ok, std::string> validate(const ImpairmentConfig& cfg);

/// What happened to one input packet.
struct Fate {
  bool lost = false;
  bool duplicated = false;
  bool reordered = false;

  friend bool operator==(const Fate&, const Fate&) = default;
};

template <class T>
struct Delivery {
  T item;
  std::size_t index;  // position in the input stream
  std::uint64_t deliver_time_us;
};

/// Streaming form of impair(). Per input packet it takes three draws, in order:
/// loss, duplication, reorder; then one jitter draw when jitter_us > 0. A reordered
/// packet is held for reorder_depth input slots. Releases are ordered by
/// (release slot, input index); a duplicate immediately follows its original.
template <class T>
class Impairer {
 public:
  explicit Impairer(const ImpairmentConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  /// Feeds the next input packet; appends anything released to `out`.
  void push(T item, std::uint64_t send_time_us, std::vector<Delivery<T>>& out) {
    const std::size_t index = next_index_++;
    Fate fate;
    fate.lost = rng_.next_unit() < cfg_.loss_p;
    fate.duplicated = rng_.next_unit() < cfg_.dup_p;
    fate.reordered = rng_.next_unit() < cfg_.reorder_p;
    std::uint64_t jitter = 0;
    if (cfg_.jitter_us > 0) jitter = static_cast<std::uint64_t>(rng_.next_unit() * static_cast<double>(cfg_.jitter_us + 1));
    if (record_fates_) fates_.push_back(fate);
    last_send_time_us_ = send_time_us;

    if (!fate.lost) {
      const std::size_t slot = index + (fate.reordered ? cfg_.reorder_depth : 0);
      const std::uint64_t delay = cfg_.base_delay_us + jitter;
      if (fate.duplicated) {
        insert(Pending{slot, index, delay, item});
        insert(Pending{slot, index, delay, std::move(item)});
      } else {
        insert(Pending{slot, index, delay, std::move(item)});
      }
    }
    release_through(index, send_time_us, out);
  }

  /// Releases everything still held, timed at the last send time.
  void flush(std::vector<Delivery<T>>& out) {
    while (!pending_.empty()) {
      auto& p = pending_.front();
      out.push_back({std::move(p.item), p.index, last_send_time_us_ + p.delay_us});
      pending_.pop_front();
    }
  }

  void record_fates(bool on) { record_fates_ = on; }
  const std::vector<Fate>& fates() const { return fates_; }

 private:
  struct Pending {
    std::size_t slot;
    std::size_t index;
    std::uint64_t delay_us;
    T item;
  };

  // Keeps pending_ sorted by (slot, index); equal keys keep insertion order.
  void insert(Pending p) {
    auto it = pending_.end();
    while (it != pending_.begin()) {
      auto prev = std::prev(it);
      if (prev->slot < p.slot || (prev->slot == p.slot && prev->index <= p.index)) break;
      it = prev;
    }
    pending_.insert(it, std::move(p));
  }

  void release_through(std::size_t slot, std::uint64_t now_us, std::vector<Delivery<T>>& out) {
    while (!pending_.empty() && pending_.front().slot <= slot) {
      auto& p = pending_.front();
      out.push_back({std::move(p.item), p.index, now_us + p.delay_us});
      pending_.pop_front();
    }
  }

  ImpairmentConfig cfg_;
  SplitMix64 rng_;
  std::deque<Pending> pending_;
  std::size_t next_index_ = 0;
  std::uint64_t last_send_time_us_ = 0;
  bool record_fates_ = false;
  std::vector<Fate> fates_;
};

template <class T>
struct Timed {
  T item;
  std::uint64_t send_time_us = 0;
};

/// Pure function of (cfg, stream): the perturbed stream. Never alters items.
template <class T>
std::vector<Delivery<T>> impair(const ImpairmentConfig& cfg, std::vector<Timed<T>> stream) {
  Impairer<T> impairer(cfg);
  std::vector<Delivery<T>> out;
  out.reserve(stream.size());
  for (auto& t : stream) impairer.push(std::move(t.item), t.send_time_us, out);
  impairer.flush(out);
  return out;
}

}  // namespace nbpk::channel
