#pragma once

// Backpack-side driver: per-port receive loops, reassembly, topic publication,
// periodic stats and the motion-command back-channel.

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "nbpk/channel.hpp"
#include "nbpk/fragment.hpp"
#include "nbpk/topic_bus.hpp"
#include "nbpk/wire.hpp"

namespace nbpk::bridge {

inline const std::string kImageTopic = "camera/image_raw";
inline const std::string kMotionTopic = "motion/state";
inline const std::string kStatsTopic = "bridge/stats";
inline const std::string kRequestTopic = "motion/request";

inline constexpr std::size_t kMotionQueueDepth = 64;

/// A received message with both the sender timestamp (inside `value`) and local receive time.
template <class T>
struct Stamped {
  T value;
  std::uint64_t receive_time_us = 0;
};

using ImageMsg = Stamped<wire::Image>;
using MotionMsg = Stamped<wire::MotionReading>;

struct BridgeStats {
  std::uint64_t time_us = 0;
  StreamStats image;
  StreamStats motion;
  std::uint64_t frames_published = 0;
  std::uint64_t motion_published = 0;
  std::uint64_t malformed_image = 0;
  std::uint64_t malformed_motion = 0;
  std::uint64_t commands_sent = 0;
  std::uint64_t commands_rejected = 0;
  std::uint64_t send_errors = 0;
};

/// One JSON object, no trailing newline.
std::string to_json_line(const BridgeStats& stats);

struct BridgeConfig {
  std::string bind_host = "0.0.0.0";
  std::uint16_t image_port = channel::kDefaultImagePort;
  std::uint16_t motion_port = channel::kDefaultMotionPort;
  channel::Address robot{"127.0.0.1", channel::kDefaultCommandPort};
  double stats_period_s = 1.0;
  /// Reassembly inactivity timeout; 0 keeps drop-on-next-START as the only eviction.
  std::uint64_t reassembly_timeout_us = 0;
};

Result<Ok, std::string> validate(const BridgeConfig& cfg);

/// Serializes MotionRequests into COMMAND packets with a fresh seq each.
class CommandForwarder {
 public:
  CommandForwarder(channel::UdpEndpoint endpoint, channel::Address robot);

  /// Validates, encodes and sends one request. Returns the datagram that went out.
  Result<Bytes, std::string> forward(const wire::MotionRequest& req);

  std::uint32_t next_seq() const { return seq_; }

 private:
  channel::UdpEndpoint endpoint_;
  channel::Address robot_;
  std::uint32_t seq_ = 0;
};

class Bridge {
 public:
  Bridge(BridgeConfig cfg, TopicBus& bus);
  ~Bridge();
  Bridge(const Bridge&) = delete;
  Bridge& operator=(const Bridge&) = delete;

  Result<Ok, std::string> start();
  void stop();

  BridgeStats stats() const;

  /// Called on the stats thread after each "bridge/stats" publication.
  void on_stats(std::function<void(const BridgeStats&)> fn) { stats_callback_ = std::move(fn); }

 private:
  void image_loop(std::stop_token stop);
  void motion_loop(std::stop_token stop);
  void command_loop(std::stop_token stop);
  void stats_loop(std::stop_token stop);

  BridgeConfig cfg_;
  TopicBus& bus_;
  std::optional<channel::UdpEndpoint> image_rx_;
  std::optional<channel::UdpEndpoint> motion_rx_;
  std::optional<CommandForwarder> forwarder_;
  std::shared_ptr<Subscription<wire::MotionRequest>> requests_;
  std::function<void(const BridgeStats&)> stats_callback_;

  mutable std::mutex image_mutex_;
  Reassembler image_reassembler_;
  std::uint64_t frames_published_ = 0;
  std::uint64_t malformed_image_ = 0;

  mutable std::mutex motion_mutex_;
  Reassembler motion_reassembler_;
  std::uint64_t motion_published_ = 0;
  std::uint64_t malformed_motion_ = 0;

  mutable std::mutex command_mutex_;
  std::uint64_t commands_sent_ = 0;
  std::uint64_t commands_rejected_ = 0;
  std::uint64_t send_errors_ = 0;

  std::mutex wake_mutex_;
  std::condition_variable_any wake_;

  std::jthread image_thread_;
  std::jthread motion_thread_;
  std::jthread command_thread_;
  std::jthread stats_thread_;
};

}  // namespace nbpk::bridge
