#include "nbpk/fragment.hpp"

#include <algorithm>

namespace nbpk {

using wire::Errc;
using wire::PacketKind;

namespace {

Unexpected<wire::Error> fail(Errc code, std::string detail) {
  return unexpected(wire::Error{code, std::move(detail)});
}

}  // namespace

wire::WireResult<Bytes> to_datagram(const Packet& pkt) {
  if (pkt.payload.size() > wire::kMaxPayload)
    return fail(Errc::OutOfRange, "payload exceeds UDP maximum");
  if (pkt.header.payload_len != pkt.payload.size())
    return fail(Errc::LengthMismatch, "payload_len does not match payload");
  auto header = wire::encode_header(pkt.header);
  if (!header) return unexpected(header.error());
  Bytes out;
  out.reserve(wire::kHeaderSize + pkt.payload.size());
  out.insert(out.end(), header->begin(), header->end());
  out.insert(out.end(), pkt.payload.begin(), pkt.payload.end());
  return out;
}

wire::WireResult<Packet> parse_datagram(ByteView datagram) {
  auto header = wire::decode_header(datagram);
  if (!header) return unexpected(header.error());
  const auto body = datagram.subspan(wire::kHeaderSize);
  if (body.size() != header->payload_len)
    return fail(Errc::LengthMismatch, "payload_len does not match datagram size");
  return Packet{*header, Bytes(body.begin(), body.end())};
}

wire::WireResult<std::vector<Packet>> packetize_image(const wire::Image& img,
                                                     std::uint16_t frag_payload,
                                                     std::uint32_t seq) {
  if (img.pixels.empty()) return fail(Errc::OutOfRange, "empty image");
  if (frag_payload < 256 || frag_payload > 65000)
    return fail(Errc::OutOfRange, "frag_payload outside [256, 65000]");
  wire::ImageStartMeta meta;
  meta.total_len = static_cast<std::uint32_t>(img.pixels.size());
  meta.width = img.width;
  meta.height = img.height;
  meta.encoding = img.encoding;
  meta.frag_payload = frag_payload;
  auto meta_bytes = wire::encode_start_meta(meta);
  if (!meta_bytes) return unexpected(meta_bytes.error());

  const auto count = static_cast<std::uint16_t>(meta.fragment_count());
  std::vector<Packet> packets;
  packets.reserve(count + 1u);

  wire::PacketHeader start;
  start.stream_id = wire::StreamId::Image;
  start.kind = PacketKind::Start;
  start.seq = seq;
  start.frag_count = count;
  start.payload_len = wire::kStartMetaSize;
  start.timestamp_us = img.timestamp_us;
  packets.push_back({start, Bytes(meta_bytes->begin(), meta_bytes->end())});

  for (std::uint16_t i = 0; i < count; ++i) {
    const std::size_t begin = std::size_t{i} * frag_payload;
    const std::size_t end = std::min(begin + frag_payload, img.pixels.size());
    wire::PacketHeader h = start;
    h.kind = PacketKind::Fragment;
    h.frag_index = i;
    h.payload_len = static_cast<std::uint16_t>(end - begin);
    packets.push_back({h, Bytes(img.pixels.begin() + static_cast<std::ptrdiff_t>(begin),
                                img.pixels.begin() + static_cast<std::ptrdiff_t>(end))});
  }
  return packets;
}

wire::WireResult<Packet> packetize_single(ByteView payload, wire::StreamId stream,
                                          std::uint32_t seq, std::uint64_t timestamp_us) {
  if (payload.size() > wire::kMaxPayload)
    return fail(Errc::OutOfRange, "payload does not fit one datagram");
  wire::PacketHeader h;
  h.stream_id = stream;
  h.kind = PacketKind::Single;
  h.seq = seq;
  h.payload_len = static_cast<std::uint16_t>(payload.size());
  h.timestamp_us = timestamp_us;
  if (auto valid = wire::check_header(h); !valid) return unexpected(valid.error());
  return Packet{h, Bytes(payload.begin(), payload.end())};
}

Reassembler::Reassembler(ReassemblerOptions options) : options_(options) {}

Reassembler::Slot& Reassembler::slot_for(wire::StreamId stream) {
  return slots_[static_cast<std::size_t>(stream) - 1];
}

bool Reassembler::collecting(wire::StreamId stream) const {
  return slots_[static_cast<std::size_t>(stream) - 1].collecting;
}

std::size_t Reassembler::buffered_bytes() const {
  std::size_t total = 0;
  for (const auto& s : slots_) total += s.buffer.size();
  return total;
}

Event Reassembler::step(const Packet& pkt, std::uint64_t recv_time_us) {
  stats_.bytes_received += wire::kHeaderSize + pkt.payload.size();
  switch (pkt.header.kind) {
    case PacketKind::Single:
      ++stats_.singles_delivered;
      return event::SingleDelivered{pkt.header.stream_id, pkt.payload, pkt.header.seq,
                                    pkt.header.timestamp_us};
    case PacketKind::Start:
      return on_start(slot_for(pkt.header.stream_id), pkt, recv_time_us);
    case PacketKind::Fragment:
      return on_fragment(slot_for(pkt.header.stream_id), pkt, recv_time_us);
  }
  ++stats_.orphan_fragments;
  return event::Orphan{};
}

void Reassembler::release(Slot& slot) {
  slot.collecting = false;
  slot.received.clear();
  slot.received_count = 0;
  Bytes().swap(slot.buffer);
}

void Reassembler::begin(Slot& slot, const Packet& pkt, const wire::ImageStartMeta& meta,
                        std::uint64_t recv_time_us) {
  slot.collecting = true;
  slot.seq = pkt.header.seq;
  slot.meta = meta;
  slot.frag_count = pkt.header.frag_count;
  slot.received.assign(slot.frag_count, false);
  slot.received_count = 0;
  slot.buffer.assign(meta.total_len, 0);
  slot.timestamp_us = pkt.header.timestamp_us;
  slot.last_activity_us = recv_time_us;
  slot.last_started = pkt.header.seq;
}

Event Reassembler::on_start(Slot& slot, const Packet& pkt, std::uint64_t recv_time_us) {
  const auto seq = pkt.header.seq;
  auto meta = wire::decode_start_meta(pkt.payload);
  if (!meta || pkt.payload.size() != wire::kStartMetaSize ||
      meta->fragment_count() != pkt.header.frag_count) {
    ++stats_.orphan_fragments;
    return event::Orphan{};
  }

  if (slot.collecting) {
    if (seq == slot.seq) {
      ++stats_.duplicate_fragments;
      return event::Duplicate{};
    }
    if (!seq_after(seq, slot.seq)) {
      ++stats_.orphan_fragments;
      return event::Orphan{};
    }
    const auto evicted = slot.seq;
    ++stats_.frames_dropped_preempted;
    release(slot);
    begin(slot, pkt, *meta, recv_time_us);
    return event::Dropped{evicted};
  }

  if (slot.last_started && !seq_after(seq, *slot.last_started)) {
    if (seq == *slot.last_started) {
      ++stats_.duplicate_fragments;
      return event::Duplicate{};
    }
    ++stats_.orphan_fragments;
    return event::Orphan{};
  }
  begin(slot, pkt, *meta, recv_time_us);
  return event::Nothing{};
}

Event Reassembler::on_fragment(Slot& slot, const Packet& pkt, std::uint64_t recv_time_us) {
  const auto& h = pkt.header;
  if (!slot.collecting || h.seq != slot.seq) {
    if (slot.last_completed && h.seq == *slot.last_completed) {
      ++stats_.duplicate_fragments;
      return event::Duplicate{};
    }
    ++stats_.orphan_fragments;
    return event::Orphan{};
  }

  const std::size_t offset = std::size_t{h.frag_index} * slot.meta.frag_payload;
  const std::size_t total = slot.meta.total_len;
  if (h.frag_count != slot.frag_count || offset >= total ||
      pkt.payload.size() != std::min<std::size_t>(slot.meta.frag_payload, total - offset)) {
    ++stats_.orphan_fragments;
    return event::Orphan{};
  }
  if (slot.received[h.frag_index]) {
    ++stats_.duplicate_fragments;
    return event::Duplicate{};
  }

  std::copy(pkt.payload.begin(), pkt.payload.end(),
            slot.buffer.begin() + static_cast<std::ptrdiff_t>(offset));
  slot.received[h.frag_index] = true;
  ++slot.received_count;
  slot.last_activity_us = recv_time_us;
  if (slot.received_count < slot.frag_count) return event::Nothing{};

  wire::Image img;
  img.width = slot.meta.width;
  img.height = slot.meta.height;
  img.encoding = slot.meta.encoding;
  img.pixels = std::move(slot.buffer);
  img.seq = slot.seq;
  img.timestamp_us = slot.timestamp_us;
  ++stats_.frames_complete;
  if (recv_time_us >= slot.timestamp_us) stats_.latency_accumulator_us += recv_time_us - slot.timestamp_us;
  slot.last_completed = slot.seq;
  release(slot);
  return event::ImageComplete{std::move(img)};
}

std::optional<event::Dropped> Reassembler::expire(std::uint64_t now_us) {
  if (options_.inactivity_timeout_us == 0) return std::nullopt;
  for (auto& slot : slots_) {
    if (slot.collecting && now_us > slot.last_activity_us &&
        now_us - slot.last_activity_us > options_.inactivity_timeout_us) {
      const auto seq = slot.seq;
      ++stats_.frames_dropped_timeout;
      release(slot);
      return event::Dropped{seq};
    }
  }
  return std::nullopt;
}

}  // namespace nbpk
