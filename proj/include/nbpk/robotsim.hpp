#pragma once

// Robot-side emulator: periodic camera and motion senders plus a command
// listener driving a simple ramped walk model.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <thread>

#include "nbpk/channel.hpp"
#include "nbpk/result.hpp"
#include "nbpk/wire.hpp"

namespace nbpk::robot {

/// Physical speeds that a normalized velocity of 1.0 maps to.
struct WalkLimits {
  double max_vx_mps = 0.25;
  double max_vy_mps = 0.15;
  double max_omega_rps = 0.8;
};

struct WalkParams {
  double ramp_rate = 2.0;  // normalized units per second
  double idle_timeout_s = 0.5;
  WalkLimits limits;
};

struct Velocity {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  friend bool operator==(const Velocity&, const Velocity&) = default;
};

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct WalkState {
  Velocity target;
  Velocity current;
  Pose2D pose;
  double last_command_s = 0.0;
  double clock_s = 0.0;
};

/// Sets the walk target from a request received at `now_s`. STAND targets zero.
WalkState apply_command(WalkState walk, const wire::MotionRequest& req, double now_s);

/// Advances the walk by dt: auto-stands after the idle timeout, ramps current
/// toward target by at most ramp_rate*dt per component, integrates odometry.
WalkState step(WalkState walk, double dt_s, const WalkParams& params);

std::uint32_t crc32(ByteView data);

/// Synthetic frame: seq (LE) in bytes [0,4), byte i = (i + seq) mod 256 in the
/// interior, CRC-32 of everything before it in the last 4 bytes.
Result<wire::Image, std::string> gen_test_image(std::uint32_t seq, std::uint16_t width,
                                                std::uint16_t height,
                                                std::uint64_t timestamp_us = 0);

enum class ImageCheck { Ok, CorruptCrc, SeqMismatch, Malformed };

struct ImageVerdict {
  ImageCheck status;
  std::uint32_t embedded_seq = 0;
};

const char* to_string(ImageCheck c);

ImageVerdict verify_test_image(const wire::Image& img);

/// Motion-thread reading at time t (seconds since start).
wire::MotionReading gen_motion(std::uint32_t seq, double t_s, const WalkState& walk,
                               const WalkLimits& limits = {}, std::uint64_t timestamp_us = 0);

struct RobotConfig {
  double fps = 30.0;
  double motion_rate_hz = 100.0;
  std::uint16_t width = 320;
  std::uint16_t height = 240;
  std::uint16_t frag_payload = wire::kDefaultFragPayload;
  std::string peer_host = "127.0.0.1";
  std::uint16_t image_port = channel::kDefaultImagePort;
  std::uint16_t motion_port = channel::kDefaultMotionPort;
  std::uint16_t command_port = channel::kDefaultCommandPort;
  std::string bind_host = "0.0.0.0";
  WalkParams walk;
};

Result<Ok, std::string> validate(const RobotConfig& cfg);

struct RobotCounters {
  std::uint64_t images_sent = 0;
  std::uint64_t motion_sent = 0;
  std::uint64_t commands_received = 0;
  std::uint64_t commands_rejected = 0;
  std::uint64_t send_errors = 0;
  std::uint32_t last_image_seq = 0;
  std::uint32_t last_motion_seq = 0;
};

/// Runs the three robot loops on their own threads until stop() or destruction.
class RobotSim {
 public:
  explicit RobotSim(RobotConfig cfg);
  ~RobotSim();
  RobotSim(const RobotSim&) = delete;
  RobotSim& operator=(const RobotSim&) = delete;

  /// Binds sockets and launches the loops. Bind failure is returned, not thrown.
  Result<Ok, std::string> start();
  void stop();

  RobotCounters counters() const;
  WalkState walk() const;

 private:
  void image_loop(std::stop_token stop);
  void motion_loop(std::stop_token stop);
  void command_loop(std::stop_token stop);
  bool sleep_until(std::stop_token& stop, std::chrono::steady_clock::time_point deadline);

  RobotConfig cfg_;
  std::optional<channel::UdpEndpoint> image_tx_;
  std::optional<channel::UdpEndpoint> motion_tx_;
  std::optional<channel::UdpEndpoint> command_rx_;

  mutable std::mutex mutex_;
  std::condition_variable_any wake_;
  RobotCounters counters_;
  WalkState walk_;
  std::deque<std::pair<wire::MotionRequest, double>> commands_;
  std::chrono::steady_clock::time_point started_;

  std::jthread image_thread_;
  std::jthread motion_thread_;
  std::jthread command_thread_;
};

}  // namespace nbpk::robot
