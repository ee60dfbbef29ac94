#include "nbpk/bridge.hpp"

#include <cmath>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "nbpk/clock.hpp"

namespace nbpk::bridge {

namespace {

nlohmann::json stream_json(const StreamStats& s) {
  return {{"frames_complete", s.frames_complete},
          {"frames_dropped_preempted", s.frames_dropped_preempted},
          {"frames_dropped_timeout", s.frames_dropped_timeout},
          {"orphan_fragments", s.orphan_fragments},
          {"duplicate_fragments", s.duplicate_fragments},
          {"singles_delivered", s.singles_delivered},
          {"bytes_received", s.bytes_received},
          {"latency_accumulator_us", s.latency_accumulator_us}};
}

constexpr auto kPoll = std::chrono::milliseconds(20);

}  // namespace

std::string to_json_line(const BridgeStats& stats) {
  nlohmann::json j = {{"time_us", stats.time_us},
                      {"image", stream_json(stats.image)},
                      {"motion", stream_json(stats.motion)},
                      {"frames_published", stats.frames_published},
                      {"motion_published", stats.motion_published},
                      {"malformed_image", stats.malformed_image},
                      {"malformed_motion", stats.malformed_motion},
                      {"commands_sent", stats.commands_sent},
                      {"commands_rejected", stats.commands_rejected},
                      {"send_errors", stats.send_errors}};
  return j.dump();
}

Result<Ok, std::string> validate(const BridgeConfig& cfg) {
  if (cfg.image_port < 1024 || cfg.motion_port < 1024 || cfg.robot.port < 1024)
    return unexpected(std::string("ports must be in [1024, 65535]"));
  if (cfg.image_port == cfg.motion_port)
    return unexpected(std::string("image and motion ports must differ"));
  if (!(cfg.stats_period_s > 0.0)) return unexpected(std::string("stats period must be positive"));
  return Ok{};
}

CommandForwarder::CommandForwarder(channel::UdpEndpoint endpoint, channel::Address robot)
    : endpoint_(std::move(endpoint)), robot_(std::move(robot)) {}

Result<Bytes, std::string> CommandForwarder::forward(const wire::MotionRequest& req) {
  auto payload = wire::encode_request(req);
  if (!payload) return unexpected("rejected request: " + payload.error().detail);
  auto pkt = packetize_single(*payload, wire::StreamId::Command, seq_, now_us());
  if (!pkt) return unexpected(pkt.error().detail);
  auto dgram = to_datagram(*pkt);
  if (!dgram) return unexpected(dgram.error().detail);
  ++seq_;
  if (auto sent = endpoint_.send_to(*dgram, robot_); !sent) return unexpected(sent.error().detail);
  return std::move(*dgram);
}

Bridge::Bridge(BridgeConfig cfg, TopicBus& bus)
    : cfg_(std::move(cfg)),
      bus_(bus),
      image_reassembler_(ReassemblerOptions{cfg_.reassembly_timeout_us}),
      motion_reassembler_(ReassemblerOptions{cfg_.reassembly_timeout_us}) {}

Bridge::~Bridge() { stop(); }

Result<Ok, std::string> Bridge::start() {
  if (auto valid = validate(cfg_); !valid) return valid;
  bus_.advertise<ImageMsg>(kImageTopic);
  bus_.advertise<MotionMsg>(kMotionTopic);
  bus_.advertise<BridgeStats>(kStatsTopic);

  channel::EndpointConfig image_cfg;
  image_cfg.bind = channel::Address{cfg_.bind_host, cfg_.image_port};
  channel::EndpointConfig motion_cfg;
  motion_cfg.bind = channel::Address{cfg_.bind_host, cfg_.motion_port};
  auto image = channel::UdpEndpoint::open(image_cfg);
  if (!image) return unexpected(image.error().detail);
  auto motion = channel::UdpEndpoint::open(motion_cfg);
  if (!motion) return unexpected(motion.error().detail);
  auto command = channel::UdpEndpoint::open(channel::EndpointConfig{});
  if (!command) return unexpected(command.error().detail);
  image_rx_.emplace(std::move(*image));
  motion_rx_.emplace(std::move(*motion));
  forwarder_.emplace(std::move(*command), cfg_.robot);
  requests_ = bus_.subscribe<wire::MotionRequest>(kRequestTopic, QueuePolicy::bounded_fifo(64));

  image_thread_ = std::jthread([this](std::stop_token st) { image_loop(st); });
  motion_thread_ = std::jthread([this](std::stop_token st) { motion_loop(st); });
  command_thread_ = std::jthread([this](std::stop_token st) { command_loop(st); });
  stats_thread_ = std::jthread([this](std::stop_token st) { stats_loop(st); });
  spdlog::info("bridge: listening image {} motion {}, commands to {}", cfg_.image_port,
               cfg_.motion_port, cfg_.robot.to_string());
  return Ok{};
}

void Bridge::stop() {
  for (auto* t : {&image_thread_, &motion_thread_, &command_thread_, &stats_thread_})
    t->request_stop();
  wake_.notify_all();
  for (auto* t : {&image_thread_, &motion_thread_, &command_thread_, &stats_thread_})
    if (t->joinable()) t->join();
}

BridgeStats Bridge::stats() const {
  BridgeStats s;
  s.time_us = now_us();
  {
    std::lock_guard lock(image_mutex_);
    s.image = image_reassembler_.stats();
    s.frames_published = frames_published_;
    s.malformed_image = malformed_image_;
  }
  {
    std::lock_guard lock(motion_mutex_);
    s.motion = motion_reassembler_.stats();
    s.motion_published = motion_published_;
    s.malformed_motion = malformed_motion_;
  }
  {
    std::lock_guard lock(command_mutex_);
    s.commands_sent = commands_sent_;
    s.commands_rejected = commands_rejected_;
    s.send_errors = send_errors_;
  }
  return s;
}

void Bridge::image_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    auto dgram = image_rx_->recv(kPoll);
    std::lock_guard lock(image_mutex_);
    if (!dgram) {
      if (dgram.error().code != channel::TransportErrc::TimedOut) ++malformed_image_;
      image_reassembler_.expire(now_us());
      continue;
    }
    const auto received = now_us();
    auto pkt = parse_datagram(dgram->data);
    if (!pkt || pkt->header.stream_id != wire::StreamId::Image) {
      ++malformed_image_;
      continue;
    }
    auto ev = image_reassembler_.step(*pkt, received);
    if (auto* done = std::get_if<event::ImageComplete>(&ev)) {
      bus_.publish(kImageTopic, ImageMsg{std::move(done->image), received});
      ++frames_published_;
    } else if (auto* dropped = std::get_if<event::Dropped>(&ev)) {
      spdlog::debug("bridge: dropped incomplete frame {}", dropped->seq);
    }
    image_reassembler_.expire(received);
  }
}

void Bridge::motion_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    auto dgram = motion_rx_->recv(kPoll);
    if (!dgram) {
      if (dgram.error().code != channel::TransportErrc::TimedOut) {
        std::lock_guard lock(motion_mutex_);
        ++malformed_motion_;
      }
      continue;
    }
    const auto received = now_us();
    std::lock_guard lock(motion_mutex_);
    auto pkt = parse_datagram(dgram->data);
    if (!pkt || pkt->header.stream_id != wire::StreamId::Motion) {
      ++malformed_motion_;
      continue;
    }
    auto ev = motion_reassembler_.step(*pkt, received);
    if (auto* single = std::get_if<event::SingleDelivered>(&ev)) {
      auto reading = wire::decode_motion(single->payload);
      if (!reading) {
        ++malformed_motion_;
        continue;
      }
      reading->seq = single->seq;
      reading->timestamp_us = single->timestamp_us;
      bus_.publish(kMotionTopic, MotionMsg{std::move(*reading), received});
      ++motion_published_;
    }
  }
}

void Bridge::command_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    auto req = requests_->wait_pop(kPoll);
    if (!req) continue;
    auto sent = forwarder_->forward(*req);
    std::lock_guard lock(command_mutex_);
    if (sent) {
      ++commands_sent_;
    } else if (!wire::validate_request(*req)) {
      ++commands_rejected_;
      spdlog::warn("bridge: {}", sent.error());
    } else {
      ++send_errors_;
      spdlog::warn("bridge: command send failed: {}", sent.error());
    }
  }
}

void Bridge::stats_loop(std::stop_token stop) {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(cfg_.stats_period_s));
  auto next = clock::now() + period;
  for (;;) {
    {
      std::unique_lock lock(wake_mutex_);
      wake_.wait_until(lock, stop, next, [] { return false; });
    }
    if (stop.stop_requested()) break;
    // stats() reads frames_published and frames_complete under one lock.
    const BridgeStats snapshot = stats();
    bus_.publish(kStatsTopic, snapshot);
    if (stats_callback_) stats_callback_(snapshot);
    next += period;
  }
}

}  // namespace nbpk::bridge
