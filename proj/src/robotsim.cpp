#include "nbpk/robotsim.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

#include "nbpk/clock.hpp"
#include "nbpk/fragment.hpp"

namespace nbpk::robot {

namespace {

double ramp_toward(double current, double target, double max_delta) {
  if (current < target) return std::min(target, current + max_delta);
  return std::max(target, current - max_delta);
}

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

WalkState apply_command(WalkState walk, const wire::MotionRequest& req, double now_s) {
  if (req.mode == wire::MotionMode::Walk) {
    walk.target = {clamp_unit(req.vx), clamp_unit(req.vy), clamp_unit(req.omega)};
  } else {
    // STAND and SPECIAL actions both hold still.
    walk.target = {};
  }
  walk.last_command_s = now_s;
  walk.clock_s = std::max(walk.clock_s, now_s);
  return walk;
}

WalkState step(WalkState walk, double dt_s, const WalkParams& params) {
  if (walk.clock_s - walk.last_command_s > params.idle_timeout_s) walk.target = {};
  const double max_delta = params.ramp_rate * dt_s;
  walk.current.vx = ramp_toward(walk.current.vx, walk.target.vx, max_delta);
  walk.current.vy = ramp_toward(walk.current.vy, walk.target.vy, max_delta);
  walk.current.omega = ramp_toward(walk.current.omega, walk.target.omega, max_delta);

  const double vx = walk.current.vx * params.limits.max_vx_mps;
  const double vy = walk.current.vy * params.limits.max_vy_mps;
  const double c = std::cos(walk.pose.theta);
  const double s = std::sin(walk.pose.theta);
  walk.pose.x += (c * vx - s * vy) * dt_s;
  walk.pose.y += (s * vx + c * vy) * dt_s;
  walk.pose.theta += walk.current.omega * params.limits.max_omega_rps * dt_s;
  walk.clock_s += dt_s;
  return walk;
}

std::uint32_t crc32(ByteView data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      ::crc32(crc, data.data(), static_cast<uInt>(data.size())));
}

Result<wire::Image, std::string> gen_test_image(std::uint32_t seq, std::uint16_t width,
                                                std::uint16_t height,
                                                std::uint64_t timestamp_us) {
  const std::size_t len = std::size_t{width} * height * 2;
  if (len < 16) return unexpected(std::string("test image needs at least 16 bytes"));
  wire::Image img;
  img.width = width;
  img.height = height;
  img.seq = seq;
  img.timestamp_us = timestamp_us;
  img.pixels.resize(len);
  std::memcpy(img.pixels.data(), &seq, 4);
  for (std::size_t i = 4; i < len - 4; ++i)
    img.pixels[i] = static_cast<std::uint8_t>((i + seq) & 0xFF);
  const std::uint32_t crc = crc32(ByteView(img.pixels).first(len - 4));
  std::memcpy(img.pixels.data() + len - 4, &crc, 4);
  return img;
}

const char* to_string(ImageCheck c) {
  switch (c) {
    case ImageCheck::Ok: return "ok";
    case ImageCheck::CorruptCrc: return "CorruptCrc";
    case ImageCheck::SeqMismatch: return "SeqMismatch";
    case ImageCheck::Malformed: return "Malformed";
  }
  return "unknown";
}

ImageVerdict verify_test_image(const wire::Image& img) {
  const std::size_t len = img.pixels.size();
  if (len < 16 || len != std::size_t{img.width} * img.height * 2)
    return {ImageCheck::Malformed};
  std::uint32_t embedded = 0, trailer = 0;
  std::memcpy(&embedded, img.pixels.data(), 4);
  std::memcpy(&trailer, img.pixels.data() + len - 4, 4);
  if (crc32(ByteView(img.pixels).first(len - 4)) != trailer)
    return {ImageCheck::CorruptCrc, embedded};
  if (embedded != img.seq) return {ImageCheck::SeqMismatch, embedded};
  return {ImageCheck::Ok, embedded};
}

wire::MotionReading gen_motion(std::uint32_t seq, double t_s, const WalkState& walk,
                               const WalkLimits& limits, std::uint64_t timestamp_us) {
  constexpr double kGaitHz = 0.5;
  const double phase = 2.0 * std::numbers::pi * kGaitHz * t_s;
  wire::MotionReading m;
  m.seq = seq;
  m.timestamp_us = timestamp_us;
  for (std::size_t j = 0; j < m.positions.size(); ++j)
    m.positions[j] = static_cast<float>(0.3 * std::sin(phase + static_cast<double>(j) * 0.1));
  m.gyro = {0.0f, 0.0f, static_cast<float>(walk.current.omega * limits.max_omega_rps)};
  m.accel = {0.0f, 0.0f, 9.81f};
  m.torso_angle = {0.0f, static_cast<float>(0.02 * std::sin(phase))};
  m.velocity = {static_cast<float>(walk.current.vx), static_cast<float>(walk.current.vy),
                static_cast<float>(walk.current.omega)};
  return m;
}

Result<Ok, std::string> validate(const RobotConfig& cfg) {
  if (!(cfg.fps > 0.0 && cfg.fps <= 60.0)) return unexpected(std::string("fps must be in (0, 60]"));
  if (!(cfg.motion_rate_hz > 0.0)) return unexpected(std::string("motion rate must be positive"));
  if (!(cfg.walk.ramp_rate > 0.0)) return unexpected(std::string("ramp rate must be positive"));
  if (std::size_t{cfg.width} * cfg.height * 2 < 16)
    return unexpected(std::string("image must hold at least 16 bytes"));
  if (cfg.width % 2 != 0) return unexpected(std::string("YUV422 width must be even"));
  if (cfg.frag_payload < 256 || cfg.frag_payload > 65000)
    return unexpected(std::string("frag size must be in [256, 65000]"));
  for (auto port : {cfg.image_port, cfg.motion_port, cfg.command_port})
    if (port < 1024) return unexpected(std::string("ports must be in [1024, 65535]"));
  return Ok{};
}

RobotSim::RobotSim(RobotConfig cfg) : cfg_(std::move(cfg)) {}

RobotSim::~RobotSim() { stop(); }

Result<Ok, std::string> RobotSim::start() {
  if (auto valid = validate(cfg_); !valid) return valid;
  channel::EndpointConfig tx;
  auto image = channel::UdpEndpoint::open(tx);
  auto motion = channel::UdpEndpoint::open(tx);
  channel::EndpointConfig rx;
  rx.bind = channel::Address{cfg_.bind_host, cfg_.command_port};
  auto command = channel::UdpEndpoint::open(rx);
  for (auto* r : {&image, &motion, &command})
    if (!*r) return unexpected(r->error().detail);
  image_tx_.emplace(std::move(*image));
  motion_tx_.emplace(std::move(*motion));
  command_rx_.emplace(std::move(*command));

  started_ = std::chrono::steady_clock::now();
  image_thread_ = std::jthread([this](std::stop_token st) { image_loop(st); });
  motion_thread_ = std::jthread([this](std::stop_token st) { motion_loop(st); });
  command_thread_ = std::jthread([this](std::stop_token st) { command_loop(st); });
  spdlog::info("robot: streaming {}x{} at {} fps to {} (image {}, motion {}), commands on {}",
               cfg_.width, cfg_.height, cfg_.fps, cfg_.peer_host, cfg_.image_port,
               cfg_.motion_port, cfg_.command_port);
  return Ok{};
}

void RobotSim::stop() {
  for (auto* t : {&image_thread_, &motion_thread_, &command_thread_}) t->request_stop();
  wake_.notify_all();
  for (auto* t : {&image_thread_, &motion_thread_, &command_thread_})
    if (t->joinable()) t->join();
}

RobotCounters RobotSim::counters() const {
  std::lock_guard lock(mutex_);
  return counters_;
}

WalkState RobotSim::walk() const {
  std::lock_guard lock(mutex_);
  return walk_;
}

bool RobotSim::sleep_until(std::stop_token& stop, std::chrono::steady_clock::time_point deadline) {
  std::unique_lock lock(mutex_);
  wake_.wait_until(lock, stop, deadline, [] { return false; });
  return !stop.stop_requested();
}

void RobotSim::image_loop(std::stop_token stop) {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(1.0 / cfg_.fps));
  const channel::Address peer{cfg_.peer_host, cfg_.image_port};
  auto next = clock::now();
  std::uint32_t seq = 0;
  while (!stop.stop_requested()) {
    auto img = gen_test_image(seq, cfg_.width, cfg_.height, now_us());
    auto packets = packetize_image(*img, cfg_.frag_payload, seq);
    std::uint64_t errors = 0;
    for (const auto& pkt : *packets) {
      auto dgram = to_datagram(pkt);
      if (!dgram || !image_tx_->send_to(*dgram, peer)) ++errors;
    }
    {
      std::lock_guard lock(mutex_);
      ++counters_.images_sent;
      counters_.last_image_seq = seq;
      counters_.send_errors += errors;
    }
    ++seq;
    next += period;
    if (clock::now() > next + period) next = clock::now();  // fell behind; do not burst
    if (!sleep_until(stop, next)) break;
  }
}

void RobotSim::motion_loop(std::stop_token stop) {
  using clock = std::chrono::steady_clock;
  const double dt = 1.0 / cfg_.motion_rate_hz;
  const auto period =
      std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(dt));
  const channel::Address peer{cfg_.peer_host, cfg_.motion_port};
  auto next = clock::now();
  std::uint32_t seq = 0;
  while (!stop.stop_requested()) {
    const double t = std::chrono::duration<double>(clock::now() - started_).count();
    wire::MotionReading reading;
    {
      std::lock_guard lock(mutex_);
      while (!commands_.empty()) {
        walk_ = apply_command(walk_, commands_.front().first, commands_.front().second);
        commands_.pop_front();
      }
      walk_ = step(walk_, dt, cfg_.walk);
      reading = gen_motion(seq, t, walk_, cfg_.walk.limits, now_us());
    }
    bool sent = false;
    if (auto payload = wire::encode_motion(reading)) {
      if (auto pkt = packetize_single(*payload, wire::StreamId::Motion, seq, reading.timestamp_us)) {
        if (auto dgram = to_datagram(*pkt)) sent = motion_tx_->send_to(*dgram, peer).ok();
      }
    }
    {
      std::lock_guard lock(mutex_);
      ++counters_.motion_sent;
      counters_.last_motion_seq = seq;
      if (!sent) ++counters_.send_errors;
    }
    ++seq;
    next += period;
    if (clock::now() > next + period) next = clock::now();
    if (!sleep_until(stop, next)) break;
  }
}

void RobotSim::command_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    auto dgram = command_rx_->recv(std::chrono::milliseconds(20));
    if (!dgram) continue;
    auto pkt = parse_datagram(dgram->data);
    bool accepted = false;
    if (pkt && pkt->header.stream_id == wire::StreamId::Command &&
        pkt->header.kind == wire::PacketKind::Single) {
      if (auto req = wire::decode_request(pkt->payload)) {
        const double now_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        std::lock_guard lock(mutex_);
        commands_.emplace_back(*req, now_s);
        ++counters_.commands_received;
        accepted = true;
      }
    }
    if (!accepted) {
      std::lock_guard lock(mutex_);
      ++counters_.commands_rejected;
      spdlog::debug("robot: rejected command datagram of {} bytes", dgram->data.size());
    }
  }
}

}  // namespace nbpk::robot
