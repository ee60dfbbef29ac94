#pragma once

// Fixed little-endian wire layouts for the robot <-> bridge UDP streams.
// See FORMAT.md for byte tables and a worked header example.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nbpk/bytes.hpp"
#include "nbpk/result.hpp"

namespace nbpk::wire {

inline constexpr std::array<std::uint8_t, 4> kMagic = {0x4E, 0x42, 0x50, 0x4B};  // "NBPK"
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 26;
inline constexpr std::size_t kStartMetaSize = 12;
inline constexpr std::size_t kRequestSize = 14;
inline constexpr std::size_t kMaxDatagram = 65507;
inline constexpr std::size_t kMaxPayload = kMaxDatagram - kHeaderSize;
inline constexpr std::uint8_t kDefaultJointCount = 25;
inline constexpr std::uint16_t kDefaultFragPayload = 1400;

enum class StreamId : std::uint8_t { Image = 1, Motion = 2, Command = 3 };
enum class PacketKind : std::uint8_t { Single = 0, Start = 1, Fragment = 2 };
enum class Encoding : std::uint8_t { Yuv422 = 1 };
enum class MotionMode : std::uint8_t { Stand = 0, Walk = 1, Special = 2 };

enum class Errc {
  TooShort,
  BadMagic,
  BadVersion,
  InvariantViolation,
  Truncated,
  LengthMismatch,
  OutOfRange,
  Inconsistent,
};

const char* to_string(Errc code);

struct Error {
  Errc code;
  std::string detail;
};

template <class T>
using WireResult = Result<T, Error>;

struct PacketHeader {
  StreamId stream_id = StreamId::Image;
  PacketKind kind = PacketKind::Single;
  std::uint8_t flags = 0;
  std::uint32_t seq = 0;
  std::uint16_t frag_index = 0;
  std::uint16_t frag_count = 0;
  std::uint16_t payload_len = 0;
  std::uint64_t timestamp_us = 0;

  friend bool operator==(const PacketHeader&, const PacketHeader&) = default;
};

struct ImageStartMeta {
  std::uint32_t total_len = 0;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  Encoding encoding = Encoding::Yuv422;
  std::uint16_t frag_payload = kDefaultFragPayload;

  /// Number of FRAGMENT packets that carry total_len bytes.
  std::uint32_t fragment_count() const;

  friend bool operator==(const ImageStartMeta&, const ImageStartMeta&) = default;
};

/// One camera frame. Pixels are packed YUYV, two bytes per pixel.
struct Image {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  Encoding encoding = Encoding::Yuv422;
  Bytes pixels;
  std::uint32_t seq = 0;
  std::uint64_t timestamp_us = 0;

  friend bool operator==(const Image&, const Image&) = default;
};

struct MotionReading {
  std::vector<float> positions = std::vector<float>(kDefaultJointCount, 0.0f);
  std::array<float, 3> gyro{};
  std::array<float, 3> accel{};
  std::array<float, 2> torso_angle{};  // roll, pitch
  std::array<float, 3> velocity{};     // vx, vy, omega, normalized
  std::uint32_t seq = 0;
  std::uint64_t timestamp_us = 0;
  /// In-band joint count; must equal positions.size() to encode.
  std::uint8_t joint_count = kDefaultJointCount;
};

/// Bitwise equality (floats compared by representation, so NaN payloads round-trip).
bool same_bits(const MotionReading& a, const MotionReading& b);

struct MotionRequest {
  MotionMode mode = MotionMode::Stand;
  std::uint8_t action_id = 0;
  float vx = 0.0f;
  float vy = 0.0f;
  float omega = 0.0f;

  friend bool operator==(const MotionRequest&, const MotionRequest&) = default;
};

/// Payload size for a MotionReading with the given joint count.
constexpr std::size_t motion_payload_size(std::size_t joint_count) {
  return 2 + 4 * joint_count + 12 + 12 + 8 + 12;
}

/// Checks the kind/fragment invariants shared by encoder and decoder.
WireResult<Ok> check_header(const PacketHeader& h);

WireResult<std::array<std::uint8_t, kHeaderSize>> encode_header(const PacketHeader& h);
WireResult<PacketHeader> decode_header(ByteView bytes);

WireResult<Bytes> encode_motion(const MotionReading& m);
/// Decodes a motion payload. seq and timestamp travel in the packet header and are left zero.
WireResult<MotionReading> decode_motion(ByteView bytes);

WireResult<std::array<std::uint8_t, kRequestSize>> encode_request(const MotionRequest& r);
WireResult<MotionRequest> decode_request(ByteView bytes);
WireResult<Ok> validate_request(const MotionRequest& r);

WireResult<std::array<std::uint8_t, kStartMetaSize>> encode_start_meta(const ImageStartMeta& m);
WireResult<ImageStartMeta> decode_start_meta(ByteView bytes);

}  // namespace nbpk::wire
