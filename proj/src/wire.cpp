#include "nbpk/wire.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace nbpk::wire {

namespace {

Unexpected<Error> fail(Errc code, std::string detail) {
  return unexpected(Error{code, std::move(detail)});
}

bool known_stream(std::uint8_t v) { return v >= 1 && v <= 3; }
bool known_kind(std::uint8_t v) { return v <= 2; }
bool known_mode(std::uint8_t v) { return v <= 2; }

bool in_unit_range(float v) { return v >= -1.0f && v <= 1.0f; }  // false for NaN

constexpr std::uint16_t kMinFragPayload = 256;
constexpr std::uint16_t kMaxFragPayload = 65000;

}  // namespace

const char* to_string(Errc code) {
  switch (code) {
    case Errc::TooShort: return "TooShort";
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadVersion: return "BadVersion";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::Truncated: return "Truncated";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::Inconsistent: return "Inconsistent";
  }
  return "Unknown";
}

std::uint32_t ImageStartMeta::fragment_count() const {
  if (frag_payload == 0) return 0;
  return static_cast<std::uint32_t>((std::uint64_t{total_len} + frag_payload - 1) / frag_payload);
}

bool same_bits(const MotionReading& a, const MotionReading& b) {
  auto eq = [](const auto& x, const auto& y) {
    return x.size() == y.size() &&
           std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0;
  };
  return a.joint_count == b.joint_count && a.seq == b.seq &&
         a.timestamp_us == b.timestamp_us && eq(a.positions, b.positions) &&
         eq(a.gyro, b.gyro) && eq(a.accel, b.accel) && eq(a.torso_angle, b.torso_angle) &&
         eq(a.velocity, b.velocity);
}

WireResult<Ok> check_header(const PacketHeader& h) {
  if (!known_stream(static_cast<std::uint8_t>(h.stream_id)))
    return fail(Errc::InvariantViolation, "unknown stream id");
  if (h.flags != 0) return fail(Errc::InvariantViolation, "reserved flags must be zero");
  switch (h.kind) {
    case PacketKind::Single:
      if (h.frag_index != 0 || h.frag_count != 0)
        return fail(Errc::InvariantViolation, "SINGLE packet must have frag_index=frag_count=0");
      break;
    case PacketKind::Start:
      if (h.frag_index != 0 || h.frag_count < 1)
        return fail(Errc::InvariantViolation, "START packet needs frag_index=0 and frag_count>=1");
      break;
    case PacketKind::Fragment:
      if (h.frag_index >= h.frag_count)
        return fail(Errc::InvariantViolation, "FRAGMENT frag_index must be < frag_count");
      break;
    default:
      return fail(Errc::InvariantViolation, "unknown packet kind");
  }
  return Ok{};
}

WireResult<std::array<std::uint8_t, kHeaderSize>> encode_header(const PacketHeader& h) {
  if (auto valid = check_header(h); !valid) return unexpected(valid.error());
  Bytes out;
  out.reserve(kHeaderSize);
  ByteWriter w(out);
  w.put_bytes(kMagic);
  w.put(kVersion);
  w.put(static_cast<std::uint8_t>(h.stream_id));
  w.put(static_cast<std::uint8_t>(h.kind));
  w.put(h.flags);
  w.put(h.seq);
  w.put(h.frag_index);
  w.put(h.frag_count);
  w.put(h.payload_len);
  w.put(h.timestamp_us);
  std::array<std::uint8_t, kHeaderSize> result{};
  std::copy(out.begin(), out.end(), result.begin());
  return result;
}

WireResult<PacketHeader> decode_header(ByteView bytes) {
  if (bytes.size() < kHeaderSize) return fail(Errc::TooShort, "header needs 26 bytes");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    return fail(Errc::BadMagic, "magic is not NBPK");
  ByteReader r(bytes.subspan(kMagic.size()));
  std::uint8_t version = 0, stream = 0, kind = 0;
  PacketHeader h;
  r.get(version);
  if (version != kVersion) return fail(Errc::BadVersion, "unsupported version");
  r.get(stream);
  r.get(kind);
  r.get(h.flags);
  r.get(h.seq);
  r.get(h.frag_index);
  r.get(h.frag_count);
  r.get(h.payload_len);
  r.get(h.timestamp_us);
  if (!known_stream(stream)) return fail(Errc::InvariantViolation, "unknown stream id");
  if (!known_kind(kind)) return fail(Errc::InvariantViolation, "unknown packet kind");
  h.stream_id = static_cast<StreamId>(stream);
  h.kind = static_cast<PacketKind>(kind);
  if (auto valid = check_header(h); !valid) return unexpected(valid.error());
  return h;
}

WireResult<Bytes> encode_motion(const MotionReading& m) {
  if (m.positions.size() != m.joint_count)
    return fail(Errc::LengthMismatch, "joint_count does not match positions length");
  Bytes out;
  out.reserve(motion_payload_size(m.joint_count));
  ByteWriter w(out);
  w.put(m.joint_count);
  w.put(std::uint8_t{0});
  for (float p : m.positions) w.put(p);
  for (float v : m.gyro) w.put(v);
  for (float v : m.accel) w.put(v);
  for (float v : m.torso_angle) w.put(v);
  for (float v : m.velocity) w.put(v);
  return out;
}

WireResult<MotionReading> decode_motion(ByteView bytes) {
  if (bytes.size() < 2) return fail(Errc::Truncated, "motion payload shorter than its prefix");
  const std::uint8_t joints = bytes[0];
  const std::size_t expected = motion_payload_size(joints);
  if (bytes.size() < expected) return fail(Errc::Truncated, "motion payload truncated");
  if (bytes.size() > expected)
    return fail(Errc::LengthMismatch, "motion payload longer than joint_count implies");
  if (bytes[1] != 0) return fail(Errc::InvariantViolation, "reserved byte must be zero");
  ByteReader r(bytes.subspan(2));
  MotionReading m;
  m.joint_count = joints;
  m.positions.assign(joints, 0.0f);
  for (float& p : m.positions) r.get(p);
  for (float& v : m.gyro) r.get(v);
  for (float& v : m.accel) r.get(v);
  for (float& v : m.torso_angle) r.get(v);
  for (float& v : m.velocity) r.get(v);
  return m;
}

WireResult<Ok> validate_request(const MotionRequest& r) {
  if (!known_mode(static_cast<std::uint8_t>(r.mode)))
    return fail(Errc::OutOfRange, "unknown motion mode");
  if (!in_unit_range(r.vx) || !in_unit_range(r.vy) || !in_unit_range(r.omega))
    return fail(Errc::OutOfRange, "velocity component outside [-1, 1]");
  return Ok{};
}

WireResult<std::array<std::uint8_t, kRequestSize>> encode_request(const MotionRequest& r) {
  if (auto valid = validate_request(r); !valid) return unexpected(valid.error());
  const bool stand = r.mode == MotionMode::Stand;
  Bytes out;
  out.reserve(kRequestSize);
  ByteWriter w(out);
  w.put(static_cast<std::uint8_t>(r.mode));
  w.put(r.action_id);
  w.put(stand ? 0.0f : r.vx);
  w.put(stand ? 0.0f : r.vy);
  w.put(stand ? 0.0f : r.omega);
  std::array<std::uint8_t, kRequestSize> result{};
  std::copy(out.begin(), out.end(), result.begin());
  return result;
}

WireResult<MotionRequest> decode_request(ByteView bytes) {
  if (bytes.size() < kRequestSize) return fail(Errc::Truncated, "request needs 14 bytes");
  if (bytes.size() > kRequestSize) return fail(Errc::LengthMismatch, "request longer than 14 bytes");
  ByteReader rd(bytes);
  std::uint8_t mode = 0;
  MotionRequest r;
  rd.get(mode);
  rd.get(r.action_id);
  rd.get(r.vx);
  rd.get(r.vy);
  rd.get(r.omega);
  if (!known_mode(mode)) return fail(Errc::OutOfRange, "unknown motion mode");
  r.mode = static_cast<MotionMode>(mode);
  if (auto valid = validate_request(r); !valid) return unexpected(valid.error());
  if (r.mode == MotionMode::Stand && (r.vx != 0.0f || r.vy != 0.0f || r.omega != 0.0f))
    return fail(Errc::InvariantViolation, "STAND request carries nonzero velocity");
  return r;
}

namespace {

WireResult<Ok> check_start_meta(const ImageStartMeta& m) {
  if (m.encoding != Encoding::Yuv422) return fail(Errc::OutOfRange, "unsupported encoding");
  if (std::uint64_t{m.width} * m.height * 2 != m.total_len)
    return fail(Errc::Inconsistent, "total_len does not equal width*height*2");
  if (m.frag_payload < kMinFragPayload || m.frag_payload > kMaxFragPayload)
    return fail(Errc::OutOfRange, "frag_payload outside [256, 65000]");
  if (m.fragment_count() > 0xFFFF)
    return fail(Errc::OutOfRange, "image needs more than 65535 fragments");
  return Ok{};
}

}  // namespace

WireResult<std::array<std::uint8_t, kStartMetaSize>> encode_start_meta(const ImageStartMeta& m) {
  if (auto valid = check_start_meta(m); !valid) return unexpected(valid.error());
  Bytes out;
  out.reserve(kStartMetaSize);
  ByteWriter w(out);
  w.put(m.total_len);
  w.put(m.width);
  w.put(m.height);
  w.put(static_cast<std::uint8_t>(m.encoding));
  w.put(std::uint8_t{0});
  w.put(m.frag_payload);
  std::array<std::uint8_t, kStartMetaSize> result{};
  std::copy(out.begin(), out.end(), result.begin());
  return result;
}

WireResult<ImageStartMeta> decode_start_meta(ByteView bytes) {
  if (bytes.size() < kStartMetaSize) return fail(Errc::Truncated, "start meta needs 12 bytes");
  ByteReader r(bytes);
  ImageStartMeta m;
  std::uint8_t encoding = 0, reserved = 0;
  r.get(m.total_len);
  r.get(m.width);
  r.get(m.height);
  r.get(encoding);
  r.get(reserved);
  r.get(m.frag_payload);
  if (encoding != static_cast<std::uint8_t>(Encoding::Yuv422))
    return fail(Errc::OutOfRange, "unsupported encoding");
  if (reserved != 0) return fail(Errc::InvariantViolation, "reserved byte must be zero");
  m.encoding = Encoding::Yuv422;
  if (auto valid = check_start_meta(m); !valid) return unexpected(valid.error());
  return m;
}

}  // namespace nbpk::wire
