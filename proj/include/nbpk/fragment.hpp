#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "nbpk/wire.hpp"

namespace nbpk {

struct Packet {
  wire::PacketHeader header;
  Bytes payload;

  friend bool operator==(const Packet&, const Packet&) = default;
};

/// Header followed by payload, ready for one UDP datagram.
wire::WireResult<Bytes> to_datagram(const Packet& pkt);

/// Splits a datagram into header and payload; payload_len must match the remaining bytes.
wire::WireResult<Packet> parse_datagram(ByteView datagram);

/// One START packet carrying ImageStartMeta, then ceil(len / frag_payload) FRAGMENT packets.
wire::WireResult<std::vector<Packet>> packetize_image(const wire::Image& img,
                                                     std::uint16_t frag_payload,
                                                     std::uint32_t seq);

wire::WireResult<Packet> packetize_single(ByteView payload, wire::StreamId stream,
                                          std::uint32_t seq, std::uint64_t timestamp_us);

struct StreamStats {
  std::uint64_t frames_complete = 0;
  std::uint64_t frames_dropped_preempted = 0;
  std::uint64_t frames_dropped_timeout = 0;
  std::uint64_t orphan_fragments = 0;
  std::uint64_t duplicate_fragments = 0;
  std::uint64_t singles_delivered = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t latency_accumulator_us = 0;

  friend bool operator==(const StreamStats&, const StreamStats&) = default;
};

namespace event {
struct Nothing {};
struct ImageComplete {
  wire::Image image;
};
struct SingleDelivered {
  wire::StreamId stream_id;
  Bytes payload;
  std::uint32_t seq;
  std::uint64_t timestamp_us;
};
struct Dropped {
  std::uint32_t seq;
};
struct Orphan {};
struct Duplicate {};
}  // namespace event

using Event = std::variant<event::Nothing, event::ImageComplete, event::SingleDelivered,
                           event::Dropped, event::Orphan, event::Duplicate>;

struct ReassemblerOptions {
  /// Drop an incomplete frame after this much inactivity. 0 disables the timeout.
  std::uint64_t inactivity_timeout_us = 0;
};

/// Single-slot reassembler: one in-flight frame per stream. A START for a newer
/// frame evicts the incomplete current one. Not thread-safe; one consumer owns it.
class Reassembler {
 public:
  explicit Reassembler(ReassemblerOptions options = {});

  /// Feeds one validated packet. recv_time_us feeds the latency accumulator.
  Event step(const Packet& pkt, std::uint64_t recv_time_us = 0);

  /// Applies the inactivity timeout; returns the dropped frame, if any.
  std::optional<event::Dropped> expire(std::uint64_t now_us);

  const StreamStats& stats() const { return stats_; }
  bool collecting(wire::StreamId stream) const;
  /// Bytes currently held in assembly buffers, across all streams.
  std::size_t buffered_bytes() const;

 private:
  struct Slot {
    bool collecting = false;
    std::uint32_t seq = 0;
    wire::ImageStartMeta meta;
    std::uint16_t frag_count = 0;
    std::vector<bool> received;
    std::uint32_t received_count = 0;
    Bytes buffer;
    std::uint64_t timestamp_us = 0;
    std::uint64_t last_activity_us = 0;
    std::optional<std::uint32_t> last_started;
    std::optional<std::uint32_t> last_completed;
  };

  Slot& slot_for(wire::StreamId stream);
  Event on_start(Slot& slot, const Packet& pkt, std::uint64_t recv_time_us);
  Event on_fragment(Slot& slot, const Packet& pkt, std::uint64_t recv_time_us);
  void begin(Slot& slot, const Packet& pkt, const wire::ImageStartMeta& meta,
             std::uint64_t recv_time_us);
  static void release(Slot& slot);

  ReassemblerOptions options_;
  std::array<Slot, 3> slots_;
  StreamStats stats_;
};

/// True when `a` is after `b` in 32-bit serial-number order.
constexpr bool seq_after(std::uint32_t a, std::uint32_t b) {
  return static_cast<std::int32_t>(a - b) > 0;
}

}  // namespace nbpk
