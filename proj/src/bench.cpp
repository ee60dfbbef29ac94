#include "nbpk/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "nbpk/bridge.hpp"
#include "nbpk/fragment.hpp"
#include "nbpk/robotsim.hpp"

namespace nbpk::bench {

namespace {

class Fnv1a {
 public:
  void add(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
      hash_ ^= (v >> (8 * i)) & 0xFF;
      hash_ *= 0x100000001B3ULL;
    }
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash_));
    return buf;
  }

 private:
  std::uint64_t hash_ = 0xCBF29CE484222325ULL;
};

std::uint64_t frame_count(const Scenario& s) {
  return static_cast<std::uint64_t>(std::floor(s.duration_s * s.fps + 1e-9));
}

void fill_latency(Report& r, std::vector<std::uint64_t>& latencies) {
  if (latencies.empty()) return;
  std::sort(latencies.begin(), latencies.end());
  const double sum = std::accumulate(latencies.begin(), latencies.end(), 0.0);
  r.latency_mean_us = sum / static_cast<double>(latencies.size());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(latencies.size())));
  r.latency_p95_us = static_cast<double>(latencies[std::max<std::size_t>(rank, 1) - 1]);
}

}  // namespace

Result<Ok, std::string> validate(const Scenario& s) {
  if (!(s.duration_s > 0.0)) return unexpected(std::string("duration must be positive"));
  if (!(s.fps > 0.0 && s.fps <= 60.0)) return unexpected(std::string("fps must be in (0, 60]"));
  if (std::size_t{s.width} * s.height * 2 < 16)
    return unexpected(std::string("image must hold at least 16 bytes"));
  if (s.frag_payload < 256 || s.frag_payload > 65000)
    return unexpected(std::string("frag size must be in [256, 65000]"));
  return channel::validate(s.impairment);
}

double analytic_delivery(double loss_p, std::uint32_t packets_per_frame) {
  return std::pow(1.0 - loss_p, static_cast<double>(packets_per_frame));
}

std::uint32_t packets_per_frame(std::uint16_t width, std::uint16_t height,
                                std::uint16_t frag_payload) {
  const std::uint64_t bytes = std::uint64_t{width} * height * 2;
  return static_cast<std::uint32_t>(1 + (bytes + frag_payload - 1) / frag_payload);
}

Report run_scenario(const Scenario& s, ScenarioTrace* trace) {
  Report r;
  r.mode = "sim";
  r.seed = s.seed;
  r.packets_per_frame = packets_per_frame(s.width, s.height, s.frag_payload);
  r.expected_ratio = analytic_delivery(s.impairment.loss_p, r.packets_per_frame);

  channel::ImpairmentConfig cfg = s.impairment;
  cfg.seed = s.seed;
  channel::Impairer<Packet> impairer(cfg);
  impairer.record_fates(true);
  Reassembler reassembler;
  std::vector<std::uint64_t> latencies;
  std::vector<std::uint32_t> delivered;
  std::vector<channel::Delivery<Packet>> out;

  auto consume = [&] {
    for (auto& d : out) {
      auto ev = reassembler.step(d.item, d.deliver_time_us);
      if (auto* done = std::get_if<event::ImageComplete>(&ev)) {
        if (robot::verify_test_image(done->image).status != robot::ImageCheck::Ok) {
          ++r.frames_corrupt;
          continue;
        }
        ++r.frames_delivered;
        delivered.push_back(done->image.seq);
        latencies.push_back(d.deliver_time_us - done->image.timestamp_us);
      }
    }
    out.clear();
  };

  const std::uint64_t frames = frame_count(s);
  for (std::uint64_t k = 0; k < frames; ++k) {
    const auto seq = static_cast<std::uint32_t>(k);
    const auto t_us = static_cast<std::uint64_t>(std::llround(static_cast<double>(k) * 1e6 / s.fps));
    auto img = robot::gen_test_image(seq, s.width, s.height, t_us);
    auto packets = packetize_image(*img, s.frag_payload, seq);
    for (auto& pkt : *packets) {
      r.bytes_on_wire += wire::kHeaderSize + pkt.payload.size();
      impairer.push(std::move(pkt), t_us, out);
    }
    ++r.frames_sent;
    consume();
  }
  impairer.flush(out);
  consume();

  const auto& st = reassembler.stats();
  r.frames_dropped_preempted = st.frames_dropped_preempted;
  r.orphan_fragments = st.orphan_fragments;
  r.duplicate_fragments = st.duplicate_fragments;
  r.delivery_ratio = r.frames_sent ? static_cast<double>(r.frames_delivered) / static_cast<double>(r.frames_sent) : 0.0;
  r.achieved_fps = static_cast<double>(r.frames_delivered) / s.duration_s;
  fill_latency(r, latencies);

  Fnv1a digest;
  for (const auto& f : impairer.fates())
    digest.add((f.lost ? 1u : 0u) | (f.duplicated ? 2u : 0u) | (f.reordered ? 4u : 0u), 1);
  for (auto seq : delivered) digest.add(seq, 4);
  r.trace_digest = digest.hex();
  if (trace) {
    trace->fates = impairer.fates();
    trace->delivered_seqs = std::move(delivered);
  }
  return r;
}

Result<Report, std::string> run_loopback(const Scenario& s, LoopbackPorts ports) {
  if (auto valid = validate(s); !valid) return unexpected(valid.error());
  TopicBus bus;
  bridge::BridgeConfig bcfg;
  bcfg.bind_host = "127.0.0.1";
  bcfg.image_port = ports.image;
  bcfg.motion_port = ports.motion;
  bcfg.robot = {"127.0.0.1", ports.command};
  bridge::Bridge bridge(bcfg, bus);

  std::mutex m;
  std::uint64_t delivered = 0, corrupt = 0;
  std::vector<std::uint64_t> latencies;
  Fnv1a digest;
  auto tap = bus.tap<bridge::ImageMsg>(bridge::kImageTopic, [&](const bridge::ImageMsg& msg) {
    const bool ok = robot::verify_test_image(msg.value).status == robot::ImageCheck::Ok;
    std::lock_guard lock(m);
    if (!ok) {
      ++corrupt;
      return;
    }
    ++delivered;
    digest.add(msg.value.seq, 4);
    if (msg.receive_time_us >= msg.value.timestamp_us)
      latencies.push_back(msg.receive_time_us - msg.value.timestamp_us);
  });
  if (auto started = bridge.start(); !started) return unexpected(started.error());

  robot::RobotConfig rcfg;
  rcfg.fps = s.fps;
  rcfg.width = s.width;
  rcfg.height = s.height;
  rcfg.frag_payload = s.frag_payload;
  rcfg.bind_host = "127.0.0.1";
  rcfg.image_port = ports.image;
  rcfg.motion_port = ports.motion;
  rcfg.command_port = ports.command;
  robot::RobotSim robot(rcfg);
  if (auto started = robot.start(); !started) return unexpected(started.error());
  std::this_thread::sleep_for(std::chrono::duration<double>(s.duration_s));
  robot.stop();
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  bridge.stop();
  tap.reset();

  const auto counters = robot.counters();
  const auto stats = bridge.stats();
  Report r;
  r.mode = "loopback";
  r.seed = s.seed;
  r.packets_per_frame = packets_per_frame(s.width, s.height, s.frag_payload);
  r.expected_ratio = 1.0;
  r.frames_sent = counters.images_sent;
  r.frames_delivered = delivered;
  r.frames_corrupt = corrupt;
  r.frames_dropped_preempted = stats.image.frames_dropped_preempted;
  r.orphan_fragments = stats.image.orphan_fragments;
  r.duplicate_fragments = stats.image.duplicate_fragments;
  r.bytes_on_wire = stats.image.bytes_received;
  r.delivery_ratio = r.frames_sent ? static_cast<double>(delivered) / static_cast<double>(r.frames_sent) : 0.0;
  r.achieved_fps = static_cast<double>(delivered) / s.duration_s;
  fill_latency(r, latencies);
  r.trace_digest = digest.hex();
  return r;
}

std::string to_json(const Report& r) {
  // nlohmann::json objects keep keys sorted, so output is deterministic.
  nlohmann::json j = {{"mode", r.mode},
                      {"seed", r.seed},
                      {"frames_sent", r.frames_sent},
                      {"frames_delivered", r.frames_delivered},
                      {"frames_corrupt", r.frames_corrupt},
                      {"frames_dropped_preempted", r.frames_dropped_preempted},
                      {"delivery_ratio", r.delivery_ratio},
                      {"expected_ratio", r.expected_ratio},
                      {"packets_per_frame", r.packets_per_frame},
                      {"latency_mean_us", r.latency_mean_us},
                      {"latency_p95_us", r.latency_p95_us},
                      {"orphan_fragments", r.orphan_fragments},
                      {"duplicate_fragments", r.duplicate_fragments},
                      {"bytes_on_wire", r.bytes_on_wire},
                      {"achieved_fps", r.achieved_fps},
                      {"trace_digest", r.trace_digest}};
  return j.dump(2);
}

Result<Report, std::string> report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Report r;
    j.at("mode").get_to(r.mode);
    j.at("seed").get_to(r.seed);
    j.at("frames_sent").get_to(r.frames_sent);
    j.at("frames_delivered").get_to(r.frames_delivered);
    j.at("frames_corrupt").get_to(r.frames_corrupt);
    j.at("frames_dropped_preempted").get_to(r.frames_dropped_preempted);
    j.at("delivery_ratio").get_to(r.delivery_ratio);
    j.at("expected_ratio").get_to(r.expected_ratio);
    j.at("packets_per_frame").get_to(r.packets_per_frame);
    j.at("latency_mean_us").get_to(r.latency_mean_us);
    j.at("latency_p95_us").get_to(r.latency_p95_us);
    j.at("orphan_fragments").get_to(r.orphan_fragments);
    j.at("duplicate_fragments").get_to(r.duplicate_fragments);
    j.at("bytes_on_wire").get_to(r.bytes_on_wire);
    j.at("achieved_fps").get_to(r.achieved_fps);
    j.at("trace_digest").get_to(r.trace_digest);
    return r;
  } catch (const nlohmann::json::exception& e) {
    return unexpected(std::string("bad report: ") + e.what());
  }
}

Result<Ok, std::string> write_report(const Report& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) return unexpected("cannot open " + path.string());
  out << to_json(r) << '\n';
  if (!out) return unexpected("write failed for " + path.string());
  return Ok{};
}

Result<Report, std::string> read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return unexpected("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

}  // namespace nbpk::bench
